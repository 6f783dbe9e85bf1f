#ifndef DPSVRG_BOUNDS_HPP
#define DPSVRG_BOUNDS_HPP

#include <vector>

#include "dpsvrg/algorithms.hpp"

namespace dpsvrg {

// Constants and per-round right-hand sides of the error-summability analysis,
// evaluated for a recorded multi-consensus run. The q-norm polynomial bound
// sum_i ||q_i^(k,s)|| <= C0 + C1 k + C2 s uses
//   C0 = sum_i ||q_i^(1,1)||, C1 = alpha m (G_g + G_h), C2 = C1 * max_s K_s,
// with G_g = 3 G_f bounding the variance-reduced gradient. The geometric
// constants come from gamma = 1 - eta^b0:
//   E0 = sum_{k>=1} gamma^(k-1) = eta^-b0,   E1 = sum k gamma^(k-1) = eta^-2b0,
//   S0 = sum gamma^((k-1)/2) = (1+sqrt(gamma)) eta^-b0,   S1 = S0^2.
struct SummabilityBounds {
  double C0 = 0, C1 = 0, C2 = 0;
  double E0 = 0, E1 = 0, S0 = 0, S1 = 0;
  double L = 0, G_f = 0, G_g = 0, G_h = 0, big_gamma = 0;
  double radius = 0;                       // iterate-norm bound used for G_f
  std::vector<double> round_e_bound;       // analytic bound on sum_k ||e^(k,s)||
  std::vector<double> round_sqrt_eps_bound;  // analytic bound on sum_k sqrt(eps)
};

// Requires a trace recorded under the multi-consensus policy (the bound
// exponents assume k gossip rounds at inner step k).
SummabilityBounds summability_bounds(const CompositeObjective& obj, const MixingSchedule& schedule,
                                     const RunConfig& cfg, const ErrorTrace& trace);

// Worst ratio of recorded sum_i ||q_i^(k,s)|| to the polynomial bound
// C0 + C1 k + C2 s over all recorded steps (<= 1 when the bound holds).
double worst_q_poly_ratio(const SummabilityBounds& b, const ErrorTrace& trace);

}  // namespace dpsvrg

#endif
