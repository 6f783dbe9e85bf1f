#include "dpsvrg/checks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpsvrg/rng.hpp"

namespace dpsvrg {
namespace checks {

namespace {

Vector random_vector(Rng& rng, int d, double scale = 1.0) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

Regularizer random_reg(Rng& rng) {
  const double pick = rng.uniform01();
  if (pick < 0.15) return Regularizer::zero();
  return Regularizer::l1(0.01 + rng.uniform01());
}

CompositeObjective make_logistic(int n, int d, int m, std::uint64_t seed, double lambda) {
  auto synth = synth_dataset(n, d, std::min(d, 5), 0.1, seed, m);
  const Regularizer reg = lambda > 0.0 ? Regularizer::l1(lambda) : Regularizer::zero();
  return CompositeObjective(LossKind::Logistic, std::move(synth.data), reg);
}

CompositeObjective make_least_squares(int n, int d, int m, std::uint64_t seed, double lambda) {
  Rng rng(Rng::splitmix64(seed) ^ 0x6c73ULL);
  Dataset data;
  data.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.features(i, j) = rng.normal();
  data.scale_max_norm();
  const Vector w = random_vector(rng, d);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) data.labels[i] = data.features.row(i).dot(w) + 0.05 * rng.normal();
  data.partition(m);
  const Regularizer reg = lambda > 0.0 ? Regularizer::l1(lambda) : Regularizer::zero();
  return CompositeObjective(LossKind::LeastSquares, std::move(data), reg);
}

}  // namespace

CheckResult lemma1_bound(int schedules, int max_span, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x6c31ULL);
  double worst = 0.0;
  for (int t = 0; t < schedules; ++t) {
    const int m = 3 + rng.uniform_int(6);
    const int bs[3] = {1, 3, 7};
    const int b = bs[rng.uniform_int(3)];
    const TopologyFamily family =
        rng.uniform01() < 0.5 ? TopologyFamily::RingSplit : TopologyFamily::RandomMatching;
    const auto schedule = MixingSchedule::make(m, b, 0.1, family, rng.next_u64());
    Matrix acc = schedule.matrix_at(0);
    for (long span = 0; span <= max_span; ++span) {
      if (span > 0) acc = schedule.matrix_at(span) * acc;
      const double dev = (acc.array() - 1.0 / m).abs().maxCoeff();
      worst = std::max(worst, dev / schedule.consensus_bound(span));
    }
  }
  return {"lemma1_consensus_bound", worst <= 1.0, worst, 1.0,
          "max |phi_ij - 1/m| / (Gamma gamma^span) over randomized schedules"};
}

CheckResult schedule_invariants(int schedules, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x736368ULL);
  double worst = 0.0;
  bool structure_ok = true;
  std::string detail;
  for (int t = 0; t < schedules && structure_ok; ++t) {
    const int m = 2 + rng.uniform_int(7);
    const int b = 1 + rng.uniform_int(5);
    const TopologyFamily family =
        rng.uniform01() < 0.5 ? TopologyFamily::RingSplit : TopologyFamily::RandomMatching;
    const auto schedule = MixingSchedule::make(m, b, std::min(0.1, 1.0 / m), family, rng.next_u64());
    try {
      for (const auto& w : schedule.matrices()) validate_mixing_matrix(w, schedule.eta());
    } catch (const std::exception& e) {
      structure_ok = false;
      detail = e.what();
      break;
    }
    if (schedule.realized_min_weight() < schedule.eta()) {
      structure_ok = false;
      detail = "realized min weight below the requested floor";
      break;
    }
    // every aligned window union must be connected; with a periodic stream
    // checking one period suffices, walk three for good measure
    for (int j = 0; j < 3; ++j) {
      std::vector<std::vector<std::pair<int, int>>> edges;
      for (int i = 0; i < b; ++i) {
        const Matrix& w = schedule.matrix_at(static_cast<long>(j) * b + i);
        std::vector<std::pair<int, int>> set;
        for (int r = 0; r < m; ++r)
          for (int c = r + 1; c < m; ++c)
            if (w(r, c) > 0.0) set.emplace_back(r, c);
        edges.push_back(std::move(set));
      }
      if (!union_connected(m, edges)) {
        structure_ok = false;
        detail = "window union disconnected";
      }
    }
    // aggregated products stay doubly stochastic
    const long l = rng.uniform_int(5);
    const long g = l + rng.uniform_int(40);
    const Matrix p = phi(schedule, l, g).entries;
    for (int i = 0; i < m; ++i) {
      worst = std::max(worst, std::abs(p.row(i).sum() - 1.0));
      worst = std::max(worst, std::abs(p.col(i).sum() - 1.0));
    }
  }
  return {"schedule_invariants", structure_ok && worst <= 1e-12, worst, 1e-12,
          structure_ok ? "double stochasticity of schedule products; window connectivity" : detail};
}

CheckResult gossip_invariants(int trials, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x676f73ULL);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int m = 2 + rng.uniform_int(5);
    const int b = 1 + rng.uniform_int(3);
    const int d = 1 + rng.uniform_int(6);
    const auto schedule =
        MixingSchedule::make(m, b, std::min(0.1, 1.0 / m), TopologyFamily::RingSplit, rng.next_u64());
    std::vector<Vector> params;
    for (int i = 0; i < m; ++i) params.push_back(random_vector(rng, d, 2.0));
    Vector mean = Vector::Zero(d);
    for (const auto& p : params) mean += p;
    mean /= m;

    const auto out = gossip_once(params, schedule.matrix_at(0));
    Vector mean_out = Vector::Zero(d);
    for (const auto& p : out) mean_out += p;
    mean_out /= m;
    const double mean_drift = (mean_out - mean).norm() / (1e-12 * mean.norm() + 1e-15);
    worst = std::max(worst, mean_drift);

    // contraction of the composed window product in max deviation
    const Matrix window = schedule.aggregated(0, b);
    const auto after = gossip_once(params, window);
    double dev_in = 0.0, dev_out = 0.0;
    for (int i = 0; i < m; ++i) {
      dev_in = std::max(dev_in, (params[static_cast<std::size_t>(i)] - mean).norm());
      dev_out = std::max(dev_out, (after[static_cast<std::size_t>(i)] - mean).norm());
    }
    if (dev_in > 0.0) worst = std::max(worst, dev_out / dev_in);
  }
  return {"gossip_mean_preservation_and_contraction", worst <= 1.0, worst, 1.0,
          "mean drift (normalized) and window-product max-deviation ratio"};
}

CheckResult prox_single_valued(int trials, double tol, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7031ULL);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const auto h = random_reg(rng);
    const double alpha = 0.05 + rng.uniform01();
    const Vector z = random_vector(rng, d, 2.0);
    const Vector a = prox_numeric(h, z, alpha, tol);
    const Vector b = prox_numeric(h, z, alpha, tol, 1.0 + 3.0 * rng.uniform01());
    worst = std::max(worst, (a - b).norm());
  }
  return {"prox_first_theorem_single_valued", worst <= 2.0 * tol, worst, 2.0 * tol,
          "prox_numeric from different internal starts"};
}

CheckResult prox_second_theorem(int trials, double slack, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7032ULL);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const auto h = random_reg(rng);
    const double alpha = 0.05 + rng.uniform01();
    const Vector z = random_vector(rng, d, 2.0);
    const Vector x = random_vector(rng, d, 2.0);
    const Vector y = h.prox(z, alpha);
    const double lhs = (z - y).dot(x - y) / alpha;
    worst = std::max(worst, lhs - (h.value(x) - h.value(y)));
  }
  return {"lemma2_second_prox_theorem", worst <= slack, worst, slack,
          "(1/alpha) <z - y, x - y> - (h(x) - h(y))"};
}

CheckResult prox_nonexpansive(int trials, double slack, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7033ULL);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const auto h = random_reg(rng);
    const double alpha = 0.05 + rng.uniform01();
    const Vector z1 = random_vector(rng, d, 2.0);
    const Vector z2 = random_vector(rng, d, 2.0);
    worst = std::max(worst, (h.prox(z1, alpha) - h.prox(z2, alpha)).norm() - (z1 - z2).norm());
  }
  return {"lemma3_prox_nonexpansive", worst <= slack, worst, slack,
          "||prox(z1) - prox(z2)|| - ||z1 - z2||"};
}

CheckResult prox_inexact_nonexpansive(int trials, double slack, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7034ULL);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const auto h = random_reg(rng);
    const double alpha = 0.05 + rng.uniform01();
    const double eps = 0.5 * rng.uniform01();
    const Vector z1 = random_vector(rng, d, 2.0);
    const Vector z2 = random_vector(rng, d, 2.0);
    const auto x1 = prox_inexact(h, z1, alpha, eps, rng.next_u64());
    const auto x2 = prox_inexact(h, z2, alpha, eps, rng.next_u64());
    const double bound = (z1 - z2).norm() + 3.0 * std::sqrt(2.0 * alpha * eps);
    worst = std::max(worst, (x1.point - x2.point).norm() - bound);
  }
  return {"inexact_prox_nonexpansive", worst <= slack, worst, slack,
          "||prox_eps(z1) - prox_eps(z2)|| - ||z1 - z2|| - 3 sqrt(2 alpha eps)"};
}

CheckResult prox_inexact_achieved(int trials, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7035ULL);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const auto h = random_reg(rng);
    const double alpha = 0.05 + rng.uniform01();
    const double eps = rng.uniform01();
    const Vector z = random_vector(rng, d, 2.0);
    const auto res = prox_inexact(h, z, alpha, eps, rng.next_u64());
    worst = std::max(worst, res.achieved_eps - eps);
    worst = std::max(worst, epsilon_of(h, res.point, z, alpha) - eps);
  }
  return {"inexact_prox_achieved_eps", worst <= 0.0, worst, 0.0,
          "achieved prox-objective gap minus eps_target"};
}

CheckResult prox_l1_vs_numeric(int trials, double tol, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7036ULL);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const double alpha = 0.05 + rng.uniform01();
    const double lambda = 0.01 + rng.uniform01();
    const Vector z = random_vector(rng, d, 2.0);
    const auto h = Regularizer::l1(lambda);
    worst = std::max(worst, (prox_l1(z, alpha, lambda) - prox_numeric(h, z, alpha, tol)).norm());
  }
  return {"prox_l1_vs_numeric_oracle", worst <= tol, worst, tol,
          "||closed form - golden-section minimizer||"};
}

CheckResult l1_membership(int trials, double slack, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7037ULL);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const double alpha = 0.05 + rng.uniform01();
    const double lambda = 0.01 + rng.uniform01();
    const Vector z = random_vector(rng, d, 2.0);
    const Vector y = prox_l1(z, alpha, lambda);
    for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs((z[j] - y[j]) / alpha) - lambda);
  }
  return {"lemma2_l1_subgradient_membership", worst <= slack, worst, slack,
          "max_j |(z - prox(z))_j| / alpha - lambda"};
}

CheckResult epsilon_formula_match(int trials, double tol, std::uint64_t seed) {
  Rng rng(Rng::splitmix64(seed) ^ 0x7038ULL);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + rng.uniform_int(8);
    const auto h = random_reg(rng);
    const double alpha = 0.05 + rng.uniform01();
    const Vector q = random_vector(rng, d, 2.0);
    const Vector y = h.prox(q, alpha);
    Vector u = random_vector(rng, d);
    u.normalize();
    // stay inside the sign-preserving region of y so the formula is exact
    double t_max = 0.1 * (1.0 + y.norm());
    for (int j = 0; j < d; ++j)
      if (y[j] != 0.0 && std::abs(u[j]) > 1e-12) t_max = std::min(t_max, 0.5 * std::abs(y[j] / u[j]));
    const Vector candidate = y + t_max * u;
    worst = std::max(worst, std::abs(inexact_prox_epsilon(h, candidate, q, alpha) -
                                     epsilon_of(h, candidate, q, alpha)));
  }
  return {"theorem1_epsilon_formula_match", worst <= tol, worst, tol,
          "|eps formula with minimizing subgradient - direct prox-objective gap|"};
}

CheckResult gradient_finite_diff(LossKind loss, int probes, double rel_tol, std::uint64_t seed) {
  const auto obj = loss == LossKind::Logistic ? make_logistic(24, 6, 3, seed, 0.1)
                                              : make_least_squares(24, 6, 3, seed, 0.1);
  Rng rng(Rng::splitmix64(seed) ^ 0x6664ULL);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    const Vector x = random_vector(rng, obj.dim());
    const int sample = rng.uniform_int(obj.data().n());
    Vector fd(obj.dim());
    for (int j = 0; j < obj.dim(); ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      fd[j] = (obj.sample_loss(xp, sample) - obj.sample_loss(xm, sample)) / (2.0 * h);
    }
    const Vector g = obj.sample_grad(x, sample);
    worst = std::max(worst, (fd - g).norm() / (1.0 + g.norm()));

    if (t % 10 == 0) {  // the pooled mean gradient as well
      Vector fd_full(obj.dim());
      for (int j = 0; j < obj.dim(); ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        fd_full[j] = (obj.smooth_value(xp) - obj.smooth_value(xm)) / (2.0 * h);
      }
      const Vector gf = obj.full_grad(x);
      worst = std::max(worst, (fd_full - gf).norm() / (1.0 + gf.norm()));
    }
  }
  const std::string name = std::string("gradient_finite_diff_") + to_string(loss);
  return {name, worst <= rel_tol, worst, rel_tol, "relative error vs central differences"};
}

CheckResult estimator_unbiased(double tol, std::uint64_t seed) {
  const auto obj = make_logistic(30, 6, 3, seed, 0.05);
  Rng rng(Rng::splitmix64(seed) ^ 0x756eULL);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_vector(rng, obj.dim());
    const Vector snap = random_vector(rng, obj.dim());
    for (int node = 0; node < obj.nodes(); ++node) {
      const Vector snapshot_full = obj.full_grad_node(snap, node);
      Vector mean = Vector::Zero(obj.dim());
      const auto& block = obj.data().node_samples[static_cast<std::size_t>(node)];
      for (int sample : block) mean += obj.vr_grad(x, snap, snapshot_full, sample);
      mean /= static_cast<double>(block.size());
      worst = std::max(worst, (mean - obj.full_grad_node(x, node)).norm());
    }
  }
  return {"vr_estimator_unbiased", worst <= tol, worst, tol,
          "||exhaustive mean of vr_grad - node full gradient||"};
}

CheckResult convexity_probe(int trials, double slack, std::uint64_t seed) {
  const auto obj = make_logistic(32, 6, 2, seed, 0.0);
  Rng rng(Rng::splitmix64(seed) ^ 0x6378ULL);
  double worst = -1e300;
  for (int t = 0; t < trials; ++t) {
    const Vector x = random_vector(rng, obj.dim());
    const Vector y = random_vector(rng, obj.dim());
    const double lhs = obj.smooth_value(x) + obj.full_grad(x).dot(y - x) - obj.smooth_value(y);
    worst = std::max(worst, lhs);
  }
  return {"convexity_probe", worst <= slack, worst, slack,
          "f(x) + <grad f(x), y - x> - f(y) over random pairs"};
}

CheckResult lemma4_variance(int n, int S, double slack, std::uint64_t seed) {
  auto obj = make_logistic(n, 8, 1, seed, 0.01);
  const auto ref = run_reference(obj, 1e-10);
  const double L = obj.smoothness_L();

  RunConfig cfg;
  cfg.alpha = 0.01;
  cfg.lambda = 0.01;
  cfg.S = S;
  cfg.m = 1;
  cfg.seed = seed;
  cfg.record_errors = true;
  const auto run = run_dpsvrg(obj, cfg);

  double worst = -1e300;
  Vector prev = Vector::Zero(obj.dim());
  Vector snapshot = Vector::Zero(obj.dim());
  std::size_t idx = 0;
  for (std::size_t s = 0; s < run.trace->round_len.size(); ++s) {
    const Vector snap_full = obj.full_grad(snapshot);
    const double f_snap = obj.value(snapshot);
    std::vector<Vector> round_iterates;
    for (long k = 1; k <= run.trace->round_len[s]; ++k, ++idx) {
      const auto& step = run.trace->steps[idx];
      double second_moment = 0.0;
      const Vector grad_prev = obj.full_grad(prev);
      for (int l = 0; l < obj.data().n(); ++l) {
        const Vector v = obj.vr_grad(prev, snapshot, snap_full, l);
        second_moment += (v - grad_prev).squaredNorm();
      }
      second_moment /= static_cast<double>(obj.data().n());
      const double rhs = 4.0 * L * (obj.value(prev) - ref.f_star) + 4.0 * L * (f_snap - ref.f_star);
      worst = std::max(worst, second_moment - rhs);
      round_iterates.push_back(step.x_bar);
      prev = step.x_bar;
    }
    Vector mean = Vector::Zero(obj.dim());
    for (const auto& it : round_iterates) mean += it;
    snapshot = mean / static_cast<double>(round_iterates.size());
  }
  return {"lemma4_variance_bound", worst <= slack, worst, slack,
          "E_l ||v - grad f(x)||^2 - 4L (F(x) - F*) - 4L (F(snapshot) - F*), exhaustive"};
}

CheckResult theorem1_equivalence(const EquivalenceSetup& su, double tol) {
  auto synth = synth_dataset(su.n, su.d, 5, 0.1, su.seed, su.m);
  const Regularizer reg = su.lambda > 0.0 ? Regularizer::l1(su.lambda) : Regularizer::zero();
  CompositeObjective obj(LossKind::Logistic, std::move(synth.data), reg);
  const auto schedule =
      MixingSchedule::make(su.m, su.b, std::min(0.1, 1.0 / su.m), TopologyFamily::RingSplit, su.seed + 1);

  RunConfig cfg;
  cfg.alpha = su.alpha;
  cfg.lambda = su.lambda;
  cfg.beta = su.beta;
  cfg.n0 = su.n0;
  cfg.S = su.S;
  cfg.m = su.m;
  cfg.seed = su.seed;
  cfg.record_errors = true;

  const auto run = run_dpsvrg(obj, schedule, cfg);
  const auto replay = run_inexact_prox_svrg(obj, cfg, &*run.trace);

  Vector tilde_bar = Vector::Zero(obj.dim());
  for (const auto& xt : run.x_tilde) tilde_bar += xt;
  tilde_bar /= static_cast<double>(cfg.m);
  const double final_dev = (replay.x_tilde - tilde_bar).norm() / (1.0 + tilde_bar.norm());

  const double dev = std::max({replay.max_rel_dev_q, replay.max_rel_dev_x, final_dev});
  std::ostringstream detail;
  detail << "max relative deviation between the replayed trajectory and the node averages"
         << "; eq8 excess " << replay.max_eq8_excess;
  const bool pass = dev <= tol && replay.max_eq8_excess <= 1e-9;
  return {"theorem1_equivalence", pass, dev, tol, detail.str()};
}

std::vector<CheckResult> assumption6_checks(const CompositeObjective& obj,
                                            const MixingSchedule& schedule, const RunConfig& cfg,
                                            const ErrorTrace& trace) {
  const auto bounds = summability_bounds(obj, schedule, cfg, trace);
  std::vector<CheckResult> out;

  double worst_e = 0.0, worst_eps = 0.0;
  bool finite = true;
  for (std::size_t s = 0; s < trace.round_len.size(); ++s) {
    finite = finite && std::isfinite(bounds.round_e_bound[s]) && std::isfinite(bounds.round_sqrt_eps_bound[s]);
    worst_e = std::max(worst_e, trace.round_sum_e[s] / bounds.round_e_bound[s]);
    worst_eps = std::max(worst_eps, trace.round_sum_sqrt_eps[s] / bounds.round_sqrt_eps_bound[s]);
  }
  out.push_back({"assumption6_sum_e", finite && worst_e <= 1.0, worst_e, 1.0,
                 "per-round sum ||e|| over the analytic bound"});
  out.push_back({"assumption6_sum_sqrt_eps", finite && worst_eps <= 1.0, worst_eps, 1.0,
                 "per-round sum sqrt(eps) over the analytic bound"});

  const double q_ratio = worst_q_poly_ratio(bounds, trace);
  out.push_back({"q_norm_polynomial", q_ratio <= 1.0, q_ratio, 1.0,
                 "sum_i ||q_i^(k,s)|| over C0 + C1 k + C2 s at every step"});

  double worst_decay = 0.0;
  for (const auto& step : trace.steps) {
    if (step.sum_q_norms <= 0.0) continue;
    const double log_bound = std::log(2.0) + schedule.log_big_gamma() +
                             static_cast<double>(step.k) * schedule.log_gamma() +
                             std::log(step.sum_q_norms);
    worst_decay = std::max(worst_decay, step.residual / std::exp(log_bound));
  }
  out.push_back({"consensus_error_decay", worst_decay <= 1.0, worst_decay, 1.0,
                 "max_i ||x_i - x_bar|| over 2 Gamma gamma^k sum_j ||q_j||"});
  return out;
}

namespace {

double plateau_gap(const std::vector<MetricsRecord>& rows) {
  std::vector<double> gaps;
  for (const auto& rec : rows)
    if (rec.k > 0) gaps.push_back(rec.gap);
  if (gaps.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t start = gaps.size() - std::max<std::size_t>(1, gaps.size() / 4);
  double best = gaps[start];
  for (std::size_t i = start; i < gaps.size(); ++i) best = std::min(best, gaps[i]);
  return best;
}

double final_snapshot_gap(const std::vector<MetricsRecord>& rows, int S) {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->k == 0 && it->s == S) return it->gap;
  return std::numeric_limits<double>::quiet_NaN();
}

long matched_dspg_iterations(double dpsvrg_passes, int n, int m, int batch) {
  return std::max<long>(1, std::lround(dpsvrg_passes * n / (static_cast<double>(m) * batch)));
}

}  // namespace

DeskScale run_desk_scale(const ConvergenceSetup& setup) {
  DeskScale desk;
  desk.setup = setup;
  auto synth = synth_dataset(setup.n, setup.d, 5, 0.1, setup.data_seed, setup.m);
  desk.obj = std::make_shared<CompositeObjective>(
      LossKind::Logistic, std::move(synth.data),
      setup.lambda > 0.0 ? Regularizer::l1(setup.lambda) : Regularizer::zero());
  desk.schedule = std::make_shared<MixingSchedule>(MixingSchedule::make(
      setup.m, setup.b, setup.eta, TopologyFamily::RingSplit, setup.schedule_seed));

  const auto ref = run_reference(*desk.obj, 1e-10);
  desk.f_star = ref.f_star;
  desk.x_star = ref.x_star;

  desk.cfg.alpha = setup.alpha;
  desk.cfg.lambda = setup.lambda;
  desk.cfg.beta = setup.beta;
  desk.cfg.n0 = setup.n0;
  desk.cfg.S = setup.S;
  desk.cfg.m = setup.m;
  desk.cfg.seed = setup.run_seed;
  desk.cfg.record_errors = true;

  VectorSink dpsvrg_rows;
  auto run = run_dpsvrg(*desk.obj, *desk.schedule, desk.cfg, &dpsvrg_rows, desk.f_star, setup.threads);
  desk.trace = std::make_shared<ErrorTrace>(std::move(*run.trace));
  desk.dpsvrg_rows = std::move(dpsvrg_rows.rows);
  desk.dpsvrg_final_gap = final_snapshot_gap(desk.dpsvrg_rows, setup.S);
  desk.rho_hat = fit_rho(desk.dpsvrg_rows, 3);

  desk.dspg_iterations = matched_dspg_iterations(run.epoch_passes, setup.n, setup.m, desk.cfg.batch);
  VectorSink dspg_rows;
  run_dspg(*desk.obj, *desk.schedule, desk.cfg, DspgStep::Constant, desk.dspg_iterations, &dspg_rows,
           desk.f_star, setup.threads);
  desk.dspg_rows = std::move(dspg_rows.rows);
  desk.dspg_plateau = plateau_gap(desk.dspg_rows);
  return desk;
}

std::vector<CheckResult> convergence_checks(const DeskScale& desk) {
  std::vector<CheckResult> out;
  out.push_back({"convergence_dpsvrg_rho_hat", desk.rho_hat < 1.0, desk.rho_hat, 1.0,
                 "fitted per-outer-round contraction of the optimality gap"});
  const double needed = 10.0 * desk.dpsvrg_final_gap;
  out.push_back({"convergence_dspg_plateau_10x", needed <= desk.dspg_plateau, needed, desk.dspg_plateau,
                 "10x DPSVRG final gap vs the DSPG plateau (min gap, last quarter)"});
  return out;
}

std::vector<CheckResult> b_sweep_checks(const DeskScale& desk, const std::vector<int>& bs,
                                        int sweep_S) {
  std::vector<double> dpsvrg_gaps, dspg_plateaus;
  for (int b : bs) {
    const auto schedule = MixingSchedule::make(desk.setup.m, b, desk.setup.eta,
                                               TopologyFamily::RingSplit, desk.setup.schedule_seed);
    RunConfig cfg = desk.cfg;
    cfg.record_errors = false;
    cfg.S = sweep_S;
    VectorSink dpsvrg_rows;
    run_dpsvrg(*desk.obj, schedule, cfg, &dpsvrg_rows, desk.f_star, desk.setup.threads);
    dpsvrg_gaps.push_back(final_snapshot_gap(dpsvrg_rows.rows, cfg.S));
    VectorSink dspg_rows;
    run_dspg(*desk.obj, schedule, cfg, DspgStep::Constant, desk.dspg_iterations, &dspg_rows,
             desk.f_star, desk.setup.threads);
    dspg_plateaus.push_back(plateau_gap(dspg_rows.rows));
  }

  std::vector<CheckResult> out;
  const auto [lo, hi] = std::minmax_element(dpsvrg_gaps.begin(), dpsvrg_gaps.end());
  std::ostringstream spread;
  spread << "final gaps across b:";
  for (double g : dpsvrg_gaps) spread << ' ' << g;
  out.push_back({"b_sweep_dpsvrg_stability", *hi < 2.0 * *lo, *hi, 2.0 * *lo, spread.str()});

  double worst_inversion = -1e300;
  std::ostringstream plat;
  plat << "DSPG plateaus across b:";
  for (std::size_t i = 0; i < dspg_plateaus.size(); ++i) {
    plat << ' ' << dspg_plateaus[i];
    if (i > 0) worst_inversion = std::max(worst_inversion, dspg_plateaus[i - 1] - dspg_plateaus[i]);
  }
  out.push_back({"b_sweep_dspg_plateau_monotone", worst_inversion <= 0.0, worst_inversion, 0.0,
                 plat.str()});
  return out;
}

CheckResult determinism_check(const DeskScale& desk, int threads_a, int threads_b) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path();
  auto run_with = [&](int threads, const std::string& tag) {
    const fs::path dpsvrg_csv = dir / ("dpsvrg_det_" + tag + ".csv");
    const fs::path dspg_csv = dir / ("dspg_det_" + tag + ".csv");
    {
      CsvSink sink(dpsvrg_csv.string());
      run_dpsvrg(*desk.obj, *desk.schedule, desk.cfg, &sink, desk.f_star, threads);
    }
    {
      CsvSink sink(dspg_csv.string());
      run_dspg(*desk.obj, *desk.schedule, desk.cfg, DspgStep::Constant, desk.dspg_iterations, &sink,
               desk.f_star, threads);
    }
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    const std::string joined = slurp(dpsvrg_csv) + slurp(dspg_csv);
    fs::remove(dpsvrg_csv);
    fs::remove(dspg_csv);
    return joined;
  };
  const std::string a = run_with(threads_a, "a");
  const std::string b = run_with(threads_b, "b");
  const bool same = a == b;
  return {"determinism_thread_counts", same, same ? 0.0 : 1.0, 0.0,
          "byte equality of CSVs across worker-thread counts " + std::to_string(threads_a) + " vs " +
              std::to_string(threads_b)};
}

}  // namespace checks

bool VerifyReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json j;
  j["level"] = level;
  j["all_pass"] = all_pass();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks)
    j["checks"].push_back({{"name", c.name},
                           {"pass", c.pass},
                           {"lhs", std::isfinite(c.lhs) ? c.lhs : std::numeric_limits<double>::quiet_NaN()},
                           {"rhs", std::isfinite(c.rhs) ? c.rhs : std::numeric_limits<double>::quiet_NaN()},
                           {"detail", c.detail}});
  return j;
}

void VerifyReport::print(std::ostream& out) const {
  for (const auto& c : checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << "  lhs=" << c.lhs << " rhs=" << c.rhs << "  ("
        << c.detail << ")\n";
  out << (all_pass() ? "VERIFY PASS" : "VERIFY FAIL") << " (" << checks.size() << " checks, level "
      << level << ")\n";
}

VerifyReport verify_suite(const std::string& level) {
  if (level != "fast" && level != "full") throw std::invalid_argument("verify_suite: level must be fast or full");
  using namespace checks;
  VerifyReport report;
  report.level = level;
  auto add = [&](CheckResult c) { report.checks.push_back(std::move(c)); };

  add(lemma1_bound(6, 60, 11));
  add(schedule_invariants(8, 12));
  add(gossip_invariants(24, 13));
  add(prox_single_valued(60, 1e-8, 14));
  add(prox_second_theorem(400, 1e-10, 15));
  add(prox_nonexpansive(400, 1e-10, 16));
  add(prox_inexact_nonexpansive(400, 1e-10, 17));
  add(prox_inexact_achieved(200, 18));
  add(prox_l1_vs_numeric(100, 1e-8, 19));
  add(l1_membership(200, 1e-12, 20));
  add(epsilon_formula_match(200, 1e-10, 21));
  add(gradient_finite_diff(LossKind::Logistic, 40, 1e-6, 22));
  add(gradient_finite_diff(LossKind::LeastSquares, 40, 1e-6, 23));
  add(estimator_unbiased(1e-12, 24));
  add(convexity_probe(400, 1e-10, 25));
  add(lemma4_variance(64, 3, 1e-8, 26));

  {
    EquivalenceSetup su;
    su.n = 64;
    su.d = 8;
    su.S = 3;
    add(theorem1_equivalence(su, 1e-8));
  }
  {
    // small recorded run for the error-summability battery
    auto synth = synth_dataset(64, 8, 4, 0.1, 27, 4);
    CompositeObjective obj(LossKind::Logistic, std::move(synth.data), Regularizer::l1(0.01));
    const auto schedule = MixingSchedule::make(4, 2, 0.1, TopologyFamily::RingSplit, 5);
    RunConfig cfg;
    cfg.alpha = 0.01;
    cfg.lambda = 0.01;
    cfg.S = 3;
    cfg.m = 4;
    cfg.seed = 27;
    cfg.record_errors = true;
    const auto run = run_dpsvrg(obj, schedule, cfg);
    for (auto& c : assumption6_checks(obj, schedule, cfg, *run.trace)) add(std::move(c));
  }

  if (level == "full") {
    EquivalenceSetup su;  // acceptance-scale equivalence
    add(theorem1_equivalence(su, 1e-8));
    const DeskScale desk = run_desk_scale(ConvergenceSetup{});
    for (auto& c : convergence_checks(desk)) add(std::move(c));
    for (auto& c : assumption6_checks(*desk.obj, *desk.schedule, desk.cfg, *desk.trace)) add(std::move(c));
    for (auto& c : b_sweep_checks(desk, {3, 7, 50})) add(std::move(c));
  }
  return report;
}

}  // namespace dpsvrg
