#include "dpsvrg/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpsvrg/rng.hpp"
#include "dpsvrg/thread_pool.hpp"

namespace dpsvrg {

namespace {

Vector mean_of(const std::vector<Vector>& xs) {
  Vector acc = Vector::Zero(xs.front().size());
  for (const auto& x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double max_deviation(const std::vector<Vector>& xs, const Vector& mean) {
  double best = 0.0;
  for (const auto& x : xs) best = std::max(best, (x - mean).norm());
  return best;
}

std::vector<Rng> node_streams(std::uint64_t seed, int m) {
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) streams.push_back(Rng::substream(seed, static_cast<std::uint64_t>(i)));
  return streams;
}

void require_equal_split(const CompositeObjective& obj, const char* who) {
  const auto& blocks = obj.data().node_samples;
  const std::size_t first = blocks.front().size();
  for (const auto& b : blocks)
    if (b.size() != first)
      throw std::invalid_argument(std::string(who) + ": requires an equal per-node sample split");
}

}  // namespace

ConsensusPolicy consensus_from_string(const std::string& name) {
  if (name == "multi") return ConsensusPolicy::Multi;
  if (name == "single") return ConsensusPolicy::Single;
  throw std::invalid_argument("unknown consensus policy: " + name);
}

std::string to_string(ConsensusPolicy policy) {
  return policy == ConsensusPolicy::Multi ? "multi" : "single";
}

DspgStep dspg_step_from_string(const std::string& name) {
  if (name == "constant") return DspgStep::Constant;
  if (name == "sqrt_decay") return DspgStep::SqrtDecay;
  throw std::invalid_argument("unknown dspg step schedule: " + name);
}

std::string to_string(DspgStep step) { return step == DspgStep::Constant ? "constant" : "sqrt_decay"; }

long RunConfig::inner_count(int s) const {
  return static_cast<long>(std::ceil(std::pow(beta, s) * static_cast<double>(n0)));
}

void RunConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("RunConfig.alpha: must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("RunConfig.lambda: must be >= 0");
  if (!(beta > 1.0)) throw std::invalid_argument("RunConfig.beta: must be > 1");
  if (n0 < 1) throw std::invalid_argument("RunConfig.n0: must be >= 1");
  if (S < 1) throw std::invalid_argument("RunConfig.S: must be >= 1");
  if (m < 1) throw std::invalid_argument("RunConfig.m: must be >= 1");
  if (batch < 1) throw std::invalid_argument("RunConfig.batch: must be >= 1");
  for (int s = 1; s <= S; ++s)
    if (inner_count(s) < 1) throw std::invalid_argument("RunConfig.n0: K_s must be >= 1 for all rounds");
}

Vector theorem1_gradient_error(const CompositeObjective& obj, const std::vector<Vector>& x_prev,
                               const Vector& xbar_prev, const std::vector<Vector>& x_snap,
                               const Vector& snap_bar, const Vector& snapshot_term,
                               const std::vector<int>& samples) {
  const int m = static_cast<int>(x_prev.size());
  Vector e = Vector::Zero(obj.dim());
  for (int i = 0; i < m; ++i) {
    const int l = samples[static_cast<std::size_t>(i)];
    e += obj.sample_grad(x_prev[static_cast<std::size_t>(i)], l) - obj.sample_grad(xbar_prev, l);
    e += obj.sample_grad(snap_bar, l) - obj.sample_grad(x_snap[static_cast<std::size_t>(i)], l);
  }
  return e / static_cast<double>(m) + snapshot_term;
}

namespace {

DpsvrgResult run_dpsvrg_impl(const CompositeObjective& obj, const MixingSchedule* schedule,
                             const RunConfig& cfg, MetricsSink* sink, double f_star, int threads) {
  cfg.validate();
  if (schedule && schedule->node_count() != cfg.m)
    throw std::invalid_argument("run_dpsvrg: schedule.m does not match RunConfig.m");
  if (!schedule && cfg.m != 1)
    throw std::invalid_argument("run_dpsvrg: a schedule is required for m > 1");
  if (obj.nodes() != cfg.m)
    throw std::invalid_argument("run_dpsvrg: dataset partition does not match RunConfig.m");
  if (cfg.record_errors) {
    if (cfg.batch != 1) throw std::invalid_argument("run_dpsvrg: record_errors requires batch = 1");
    require_equal_split(obj, "run_dpsvrg: record_errors");
  }

  const int m = cfg.m, d = obj.dim();
  const int n = obj.data().n();
  const Regularizer& h = obj.reg();
  ThreadPool pool(threads);

  std::vector<Vector> x(static_cast<std::size_t>(m), Vector::Zero(d));
  std::vector<Vector> x_tilde = x;
  std::vector<Vector> snapshot_full(static_cast<std::size_t>(m), Vector::Zero(d));
  std::vector<Vector> q(static_cast<std::size_t>(m), Vector::Zero(d));
  std::vector<Vector> inner_sum(static_cast<std::size_t>(m), Vector::Zero(d));
  std::vector<Vector> x_prev;
  auto streams = node_streams(cfg.seed, m);
  std::vector<std::vector<int>> drawn(static_cast<std::size_t>(m));

  DpsvrgResult result;
  if (cfg.record_errors) {
    result.trace.emplace();
    result.trace->m = m;
    result.trace->alpha = cfg.alpha;
  }

  long long grads = 0, comm = 0;
  long cursor = 0;

  auto emit = [&](int s, long k, const Vector& at, double resid, double sum_e, double sum_se) {
    if (!sink) return;
    MetricsRecord rec;
    rec.algo = "dpsvrg";
    rec.s = s;
    rec.k = k;
    rec.epoch_passes = static_cast<double>(grads) / static_cast<double>(n);
    rec.comm_rounds = comm;
    rec.loss = obj.value(at);
    rec.gap = rec.loss - f_star;
    rec.consensus_residual = resid;
    rec.sum_e = sum_e;
    rec.sum_sqrt_eps = sum_se;
    sink->push(rec);
  };

  emit(0, 0, Vector::Zero(d), 0.0, 0.0, 0.0);

  Matrix q_mat(m, d), qhat_mat(m, d);
  for (int s = 1; s <= cfg.S; ++s) {
    const long K = cfg.inner_count(s);
    pool.run(m, [&](int i) { snapshot_full[static_cast<std::size_t>(i)] = obj.full_grad_node(x_tilde[static_cast<std::size_t>(i)], i); });
    grads += n;

    Vector snap_bar, snapshot_term;
    if (cfg.record_errors) {
      snap_bar = mean_of(x_tilde);
      snapshot_term = Vector::Zero(d);
      for (int i = 0; i < m; ++i)
        snapshot_term += snapshot_full[static_cast<std::size_t>(i)] - obj.full_grad_node(snap_bar, i);
      snapshot_term /= static_cast<double>(m);
    }
    for (auto& acc : inner_sum) acc.setZero();
    double round_sum_e = 0.0, round_sum_sqrt_eps = 0.0;

    for (long k = 1; k <= K; ++k) {
      Vector xbar_prev;
      if (cfg.record_errors) {
        x_prev = x;
        xbar_prev = mean_of(x);
      }
      pool.run(m, [&](int i) {
        const auto ui = static_cast<std::size_t>(i);
        auto& mine = drawn[ui];
        mine.resize(static_cast<std::size_t>(cfg.batch));
        const auto& block = obj.data().node_samples[ui];
        Vector v = Vector::Zero(d);
        for (int t = 0; t < cfg.batch; ++t) {
          const int local = streams[ui].uniform_int(static_cast<int>(block.size()));
          const int g = block[static_cast<std::size_t>(local)];
          mine[static_cast<std::size_t>(t)] = g;
          v += obj.sample_grad(x[ui], g) - obj.sample_grad(x_tilde[ui], g);
        }
        v /= static_cast<double>(cfg.batch);
        v += snapshot_full[ui];
        q[ui] = x[ui] - cfg.alpha * v;
        q_mat.row(i) = q[ui].transpose();
      });
      grads += 2LL * m * cfg.batch;

      if (schedule) {
        const long rounds = cfg.consensus == ConsensusPolicy::Multi ? k : 1;
        const Matrix agg = schedule->aggregated(cursor, rounds);
        cursor += rounds;
        comm += rounds;
        qhat_mat.noalias() = agg * q_mat;
      } else {
        qhat_mat = q_mat;
      }

      pool.run(m, [&](int i) {
        const auto ui = static_cast<std::size_t>(i);
        x[ui] = h.prox(qhat_mat.row(i).transpose(), cfg.alpha);
        inner_sum[ui] += x[ui];
      });

      const Vector xbar = mean_of(x);
      const double residual = max_deviation(x, xbar);
      if (cfg.record_errors) {
        ErrorStep step;
        step.s = s;
        step.k = k;
        step.residual = residual;
        step.samples.resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) step.samples[static_cast<std::size_t>(i)] = drawn[static_cast<std::size_t>(i)][0];
        step.e = theorem1_gradient_error(obj, x_prev, xbar_prev, x_tilde, snap_bar, snapshot_term, step.samples);
        step.q_bar = mean_of(q);
        step.x_bar = xbar;
        step.eps = inexact_prox_epsilon(h, step.x_bar, step.q_bar, cfg.alpha);
        step.sum_q_norms = 0.0;
        for (const auto& qi : q) step.sum_q_norms += qi.norm();
        round_sum_e += step.e.norm();
        round_sum_sqrt_eps += std::sqrt(step.eps);
        result.trace->steps.push_back(std::move(step));
      }
      emit(s, k, xbar, residual, round_sum_e, round_sum_sqrt_eps);
    }

    for (int i = 0; i < m; ++i) x_tilde[static_cast<std::size_t>(i)] = inner_sum[static_cast<std::size_t>(i)] / static_cast<double>(K);
    if (cfg.record_errors) {
      result.trace->round_sum_e.push_back(round_sum_e);
      result.trace->round_sum_sqrt_eps.push_back(round_sum_sqrt_eps);
      result.trace->round_len.push_back(K);
    }
    const Vector tbar = mean_of(x_tilde);
    emit(s, 0, tbar, max_deviation(x_tilde, tbar), round_sum_e, round_sum_sqrt_eps);
  }

  result.x_tilde = std::move(x_tilde);
  result.epoch_passes = static_cast<double>(grads) / static_cast<double>(n);
  result.comm_rounds = comm;
  return result;
}

}  // namespace

DpsvrgResult run_dpsvrg(const CompositeObjective& obj, const MixingSchedule& schedule,
                        const RunConfig& cfg, MetricsSink* sink, double f_star, int threads) {
  return run_dpsvrg_impl(obj, &schedule, cfg, sink, f_star, threads);
}

DpsvrgResult run_dpsvrg(const CompositeObjective& obj, const RunConfig& cfg, MetricsSink* sink,
                        double f_star, int threads) {
  if (cfg.m != 1) throw std::invalid_argument("run_dpsvrg: the schedule-free form requires m = 1");
  return run_dpsvrg_impl(obj, nullptr, cfg, sink, f_star, threads);
}

InexactResult run_inexact_prox_svrg(const CompositeObjective& obj, const RunConfig& cfg,
                                    const ErrorTrace* replay, MetricsSink* sink, double f_star,
                                    const std::function<double(int, long)>& eps_schedule) {
  cfg.validate();
  if (obj.nodes() != cfg.m)
    throw std::invalid_argument("run_inexact_prox_svrg: dataset partition does not match RunConfig.m");
  if (cfg.m > 1) require_equal_split(obj, "run_inexact_prox_svrg");
  if (replay) {
    if (replay->m != cfg.m) throw std::invalid_argument("run_inexact_prox_svrg: trace node count mismatch");
    if (replay->alpha != cfg.alpha) throw std::invalid_argument("run_inexact_prox_svrg: trace alpha mismatch");
    if (static_cast<int>(replay->round_len.size()) != cfg.S)
      throw std::invalid_argument("run_inexact_prox_svrg: trace round count does not match RunConfig.S");
    for (int s = 1; s <= cfg.S; ++s)
      if (replay->round_len[static_cast<std::size_t>(s - 1)] != cfg.inner_count(s))
        throw std::invalid_argument("run_inexact_prox_svrg: trace inner counts do not match the (S, K_s) grid");
  }

  const int m = cfg.m, d = obj.dim();
  const int n = obj.data().n();
  const Regularizer& h = obj.reg();

  Vector x = Vector::Zero(d), x_tilde = Vector::Zero(d);
  auto streams = node_streams(cfg.seed, m);
  std::vector<int> samples(static_cast<std::size_t>(m));

  InexactResult result;
  long long grads = 0;
  std::size_t step_idx = 0;

  auto emit = [&](int s, long k, const Vector& at) {
    if (!sink) return;
    MetricsRecord rec;
    rec.algo = "inexact";
    rec.s = s;
    rec.k = k;
    rec.epoch_passes = static_cast<double>(grads) / static_cast<double>(n);
    rec.comm_rounds = 0;
    rec.loss = obj.value(at);
    rec.gap = rec.loss - f_star;
    sink->push(rec);
  };

  emit(0, 0, x);

  for (int s = 1; s <= cfg.S; ++s) {
    const long K = cfg.inner_count(s);
    const Vector snapshot_full = obj.full_grad(x_tilde);
    grads += n;
    Vector inner_sum = Vector::Zero(d);

    for (long k = 1; k <= K; ++k) {
      if (replay) {
        samples = replay->steps[step_idx].samples;
      } else {
        for (int i = 0; i < m; ++i) {
          const auto& block = obj.data().node_samples[static_cast<std::size_t>(i)];
          const int local = streams[static_cast<std::size_t>(i)].uniform_int(static_cast<int>(block.size()));
          samples[static_cast<std::size_t>(i)] = block[static_cast<std::size_t>(local)];
        }
      }
      Vector v = Vector::Zero(d);
      for (int i = 0; i < m; ++i) {
        const int l = samples[static_cast<std::size_t>(i)];
        v += obj.sample_grad(x, l) - obj.sample_grad(x_tilde, l);
      }
      v /= static_cast<double>(m);
      v += snapshot_full;
      grads += 2LL * m;

      if (replay) {
        const ErrorStep& rec = replay->steps[step_idx++];
        const Vector q = x - cfg.alpha * (v + rec.e);
        result.max_rel_dev_q = std::max(result.max_rel_dev_q, (q - rec.q_bar).norm() / (1.0 + rec.q_bar.norm()));
        // The recorded member of the eps-suboptimal set, expressed as the
        // recorded prox displacement applied to this trajectory's q.
        x = q + (rec.x_bar - rec.q_bar);
        result.max_rel_dev_x = std::max(result.max_rel_dev_x, (x - rec.x_bar).norm() / (1.0 + rec.x_bar.norm()));
        result.max_eq8_excess = std::max(result.max_eq8_excess, epsilon_of(h, x, q, cfg.alpha) - rec.eps);
      } else {
        const Vector q = x - cfg.alpha * v;
        const double eps = eps_schedule ? eps_schedule(s, k) : 0.0;
        if (eps > 0.0) {
          x = prox_inexact(h, q, cfg.alpha, eps,
                           Rng::splitmix64(cfg.seed) ^ (static_cast<std::uint64_t>(s) << 32 | static_cast<std::uint64_t>(k)))
                  .point;
        } else {
          x = h.prox(q, cfg.alpha);
        }
      }
      inner_sum += x;
      emit(s, k, x);
    }
    x_tilde = inner_sum / static_cast<double>(K);
    // warm start: x already holds x^(K_s,s) = x^(0,s+1)
    emit(s, 0, x_tilde);
  }

  result.x_tilde = x_tilde;
  result.epoch_passes = static_cast<double>(grads) / static_cast<double>(n);
  return result;
}

DspgResult run_dspg(const CompositeObjective& obj, const MixingSchedule& schedule, const RunConfig& cfg,
                    DspgStep step, long iterations, MetricsSink* sink, double f_star, int threads) {
  cfg.validate();
  if (iterations < 1) throw std::invalid_argument("run_dspg: iterations must be >= 1");
  if (schedule.node_count() != cfg.m)
    throw std::invalid_argument("run_dspg: schedule.m does not match RunConfig.m");
  if (obj.nodes() != cfg.m)
    throw std::invalid_argument("run_dspg: dataset partition does not match RunConfig.m");

  const int m = cfg.m, d = obj.dim();
  const int n = obj.data().n();
  const Regularizer& h = obj.reg();
  ThreadPool pool(threads);

  std::vector<Vector> x(static_cast<std::size_t>(m), Vector::Zero(d));
  auto streams = node_streams(cfg.seed, m);

  long long grads = 0, comm = 0;
  Matrix q_mat(m, d), qhat_mat(m, d);

  auto emit = [&](long k, const Vector& at, double resid) {
    if (!sink) return;
    MetricsRecord rec;
    rec.algo = "dspg";
    rec.s = 0;
    rec.k = k;
    rec.epoch_passes = static_cast<double>(grads) / static_cast<double>(n);
    rec.comm_rounds = comm;
    rec.loss = obj.value(at);
    rec.gap = rec.loss - f_star;
    rec.consensus_residual = resid;
    sink->push(rec);
  };

  emit(0, Vector::Zero(d), 0.0);

  for (long t = 1; t <= iterations; ++t) {
    const double alpha_t =
        step == DspgStep::Constant ? cfg.alpha : cfg.alpha / std::sqrt(static_cast<double>(t));
    pool.run(m, [&](int i) {
      const auto ui = static_cast<std::size_t>(i);
      const auto& block = obj.data().node_samples[ui];
      Vector g = Vector::Zero(d);
      for (int b = 0; b < cfg.batch; ++b) {
        const int local = streams[ui].uniform_int(static_cast<int>(block.size()));
        g += obj.sample_grad(x[ui], block[static_cast<std::size_t>(local)]);
      }
      g /= static_cast<double>(cfg.batch);
      q_mat.row(i) = (x[ui] - alpha_t * g).transpose();
    });
    grads += static_cast<long long>(m) * cfg.batch;

    qhat_mat.noalias() = schedule.matrix_at(static_cast<long>(comm)) * q_mat;
    ++comm;

    pool.run(m, [&](int i) {
      x[static_cast<std::size_t>(i)] = h.prox(qhat_mat.row(i).transpose(), alpha_t);
    });
    const Vector xbar = mean_of(x);
    emit(t, xbar, max_deviation(x, xbar));
  }

  DspgResult result;
  result.x = std::move(x);
  result.epoch_passes = static_cast<double>(grads) / static_cast<double>(n);
  result.comm_rounds = comm;
  return result;
}

ReferenceResult run_reference(const CompositeObjective& obj, double tol, long max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("run_reference: tol must be > 0");
  const Regularizer& h = obj.reg();
  const double L = std::max(obj.smoothness_L(), 1e-12);
  double alpha = 1.0 / L;

  Vector x = Vector::Zero(obj.dim());
  double fx = obj.smooth_value(x);
  ReferenceResult result;
  for (long it = 1; it <= max_iterations; ++it) {
    const Vector g = obj.full_grad(x);
    Vector x_next;
    double f_next = 0.0;
    for (int bt = 0;; ++bt) {
      x_next = h.prox(x - alpha * g, alpha);
      f_next = obj.smooth_value(x_next);
      const Vector diff = x_next - x;
      if (f_next <= fx + g.dot(diff) + diff.squaredNorm() / (2.0 * alpha) + 1e-16 * std::abs(fx)) break;
      if (bt > 200) throw std::runtime_error("run_reference: backtracking failed");
      alpha *= 0.5;
    }
    const double gm = (x - x_next).norm() / alpha;
    x = x_next;
    fx = f_next;
    result.iterations = it;
    result.grad_map_norm = gm;
    if (gm <= tol) {
      result.x_star = x;
      result.f_star = fx + h.value(x);
      return result;
    }
    alpha = std::min(alpha * 1.25, 1e6 / L);
  }
  throw std::runtime_error("run_reference: iteration cap exceeded before reaching tol");
}

}  // namespace dpsvrg
