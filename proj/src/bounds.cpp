#include "dpsvrg/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpsvrg {

SummabilityBounds summability_bounds(const CompositeObjective& obj, const MixingSchedule& schedule,
                                     const RunConfig& cfg, const ErrorTrace& trace) {
  if (cfg.consensus != ConsensusPolicy::Multi)
    throw std::invalid_argument("summability_bounds: requires the multi-consensus policy");
  if (trace.steps.empty()) throw std::invalid_argument("summability_bounds: empty trace");

  SummabilityBounds b;
  b.L = obj.smoothness_L();
  b.G_h = obj.reg().subgrad_bound(obj.dim());

  double max_sum_q = 0.0;
  for (const auto& step : trace.steps) max_sum_q = std::max(max_sum_q, step.sum_q_norms);
  // Every evaluation point (x_i, snapshots and their means) satisfies
  // ||x|| <= max_j ||q_j|| + alpha G_h <= sum_j ||q_j|| + alpha G_h.
  b.radius = max_sum_q + cfg.alpha * b.G_h + 1.0;
  const auto bc = obj.bound_constants(b.radius);
  b.G_f = bc.G_f;
  b.G_g = 3.0 * b.G_f;

  long k_max = 0;
  for (long len : trace.round_len) k_max = std::max(k_max, len);
  b.C0 = trace.steps.front().sum_q_norms;
  b.C1 = cfg.alpha * cfg.m * (b.G_g + b.G_h);
  b.C2 = b.C1 * static_cast<double>(k_max);

  const double inv_eta_pow = std::exp(-schedule.log_eta_pow_b0());  // eta^-b0
  b.E0 = inv_eta_pow;
  b.E1 = inv_eta_pow * inv_eta_pow;
  b.S0 = (1.0 + std::sqrt(schedule.gamma())) * inv_eta_pow;
  b.S1 = b.S0 * b.S0;
  b.big_gamma = schedule.big_gamma();

  const int S = static_cast<int>(trace.round_len.size());
  b.round_e_bound.resize(static_cast<std::size_t>(S));
  b.round_sqrt_eps_bound.resize(static_cast<std::size_t>(S));
  const double L = b.L, G = b.big_gamma;
  for (int s = 1; s <= S; ++s) {
    const double poly_s = b.C0 + b.C2 * static_cast<double>(s);
    const double poly_prev = b.C0 + b.C2 * static_cast<double>(s - 1);
    double e_bound = 2.0 * L * G * (poly_s * b.E0 + b.C1 * b.E1);
    if (s >= 2) {
      const double k_prev = static_cast<double>(trace.round_len[static_cast<std::size_t>(s - 2)]);
      const double k_cur = static_cast<double>(trace.round_len[static_cast<std::size_t>(s - 1)]);
      // k = 1 inherits the dissensus of the previous round's last step
      e_bound += 2.0 * L * G * (b.C0 + b.C1 * k_prev + b.C2 * (s - 1));
      // snapshot dissensus, constant over the round's K_s steps
      e_bound += (k_cur / k_prev) * 4.0 * L * G * (poly_prev * b.E0 + b.C1 * b.E1);
    }
    b.round_e_bound[static_cast<std::size_t>(s - 1)] = e_bound;
    b.round_sqrt_eps_bound[static_cast<std::size_t>(s - 1)] =
        G / (2.0 * cfg.alpha) * (poly_s * b.E0 + b.C1 * b.E1) +
        std::sqrt(2.0 * b.G_h * G) * (std::sqrt(poly_s) * b.S0 + std::sqrt(b.C1) * b.S1);
  }
  return b;
}

double worst_q_poly_ratio(const SummabilityBounds& b, const ErrorTrace& trace) {
  double worst = 0.0;
  for (const auto& step : trace.steps) {
    const double bound = b.C0 + b.C1 * static_cast<double>(step.k) + b.C2 * static_cast<double>(step.s);
    worst = std::max(worst, step.sum_q_norms / bound);
  }
  return worst;
}

}  // namespace dpsvrg
