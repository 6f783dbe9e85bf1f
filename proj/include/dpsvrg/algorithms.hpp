#ifndef DPSVRG_ALGORITHMS_HPP
#define DPSVRG_ALGORITHMS_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpsvrg/objective.hpp"
#include "dpsvrg/topology.hpp"

namespace dpsvrg {

enum class ConsensusPolicy { Multi, Single };

ConsensusPolicy consensus_from_string(const std::string& name);
std::string to_string(ConsensusPolicy policy);

struct RunConfig {
  double alpha = 0.01;
  double lambda = 0.01;
  double beta = 2.0;   // inner-loop growth base
  long n0 = 4;         // initial inner count
  int S = 1;           // outer rounds
  int m = 1;           // nodes
  int batch = 1;
  ConsensusPolicy consensus = ConsensusPolicy::Multi;
  std::uint64_t seed = 0;
  bool record_errors = false;

  long inner_count(int s) const;  // K_s = ceil(beta^s n0)
  void validate() const;          // throws with the offending field name
};

struct MetricsRecord {
  std::string algo;
  int s = 0;
  long k = 0;
  double epoch_passes = 0.0;
  long long comm_rounds = 0;
  double gap = 0.0;
  double loss = 0.0;
  double consensus_residual = 0.0;
  double sum_e = 0.0;
  double sum_sqrt_eps = 0.0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void push(const MetricsRecord& rec) = 0;
};

class VectorSink : public MetricsSink {
 public:
  void push(const MetricsRecord& rec) override { rows.push_back(rec); }
  std::vector<MetricsRecord> rows;
};

// One inner step of the centralized-equivalence error trace.
struct ErrorStep {
  int s = 0;
  long k = 0;
  Vector e;                  // gradient error e^(k,s)
  double eps = 0.0;          // proximal error eps^(k,s)
  std::vector<int> samples;  // global sample index drawn by each node
  Vector q_bar;              // mean pre-consensus point
  Vector x_bar;              // mean post-prox iterate
  double sum_q_norms = 0.0;  // sum_i ||q_i||
  double residual = 0.0;     // max_i ||x_i - x_bar||
};

struct ErrorTrace {
  int m = 0;
  double alpha = 0.0;
  std::vector<ErrorStep> steps;            // ordered by (s, k)
  std::vector<double> round_sum_e;         // sum_k ||e^(k,s)|| per outer round
  std::vector<double> round_sum_sqrt_eps;  // sum_k sqrt(eps^(k,s)) per outer round
  std::vector<long> round_len;             // K_s
};

// Theorem-1 gradient error for one inner step: mean over nodes of the three
// gradient differences between per-node and averaged evaluation points.
// `snapshot_term` is the round constant (1/m) sum_i (grad_i(xt_i) - grad_i(xt_bar)).
Vector theorem1_gradient_error(const CompositeObjective& obj, const std::vector<Vector>& x_prev,
                               const Vector& xbar_prev, const std::vector<Vector>& x_snap,
                               const Vector& snap_bar, const Vector& snapshot_term,
                               const std::vector<int>& samples);

struct DpsvrgResult {
  std::vector<Vector> x_tilde;  // per-node snapshots after the last round
  std::optional<ErrorTrace> trace;
  double epoch_passes = 0.0;
  long long comm_rounds = 0;
};

// Algorithm: per inner step each node draws a sample, forms the
// variance-reduced gradient, takes the step q_i = x_i - alpha v_i, the nodes
// average through the aggregated consensus matrix, and each applies the prox.
// Snapshots are refreshed as the running mean of the round's inner iterates.
// Deterministic for a fixed seed, for any thread count.
DpsvrgResult run_dpsvrg(const CompositeObjective& obj, const MixingSchedule& schedule,
                        const RunConfig& cfg, MetricsSink* sink = nullptr,
                        double f_star = std::numeric_limits<double>::quiet_NaN(), int threads = 1);

// Single-node form (cfg.m == 1): the consensus step is the identity, so this
// is exact centralized Prox-SVRG with e = 0 and eps = 0.
DpsvrgResult run_dpsvrg(const CompositeObjective& obj, const RunConfig& cfg,
                        MetricsSink* sink = nullptr,
                        double f_star = std::numeric_limits<double>::quiet_NaN(), int threads = 1);

struct InexactResult {
  Vector x_tilde;
  double epoch_passes = 0.0;
  // Replay diagnostics (0 when free-running):
  double max_rel_dev_q = 0.0;  // max ||q - q_bar_rec|| / (1 + ||q_bar_rec||)
  double max_rel_dev_x = 0.0;  // max ||x - x_bar_rec|| / (1 + ||x_bar_rec||)
  double max_eq8_excess = 0.0; // max prox-objective gap beyond the recorded eps
};

// Centralized Inexact Prox-SVRG over the pooled objective. With
// replay == nullptr and a zero eps schedule this is exact Prox-SVRG; with a
// replayed trace the recorded samples and error terms are injected and the
// inexact prox realizes the recorded member of the eps-suboptimal set (the
// recorded prox displacement applied to the replay's own q).
InexactResult run_inexact_prox_svrg(const CompositeObjective& obj, const RunConfig& cfg,
                                    const ErrorTrace* replay = nullptr, MetricsSink* sink = nullptr,
                                    double f_star = std::numeric_limits<double>::quiet_NaN(),
                                    const std::function<double(int, long)>& eps_schedule = {});

enum class DspgStep { Constant, SqrtDecay };

DspgStep dspg_step_from_string(const std::string& name);
std::string to_string(DspgStep step);

struct DspgResult {
  std::vector<Vector> x;
  double epoch_passes = 0.0;
  long long comm_rounds = 0;
};

// Baseline: one stochastic gradient step, one gossip round, one prox per
// iteration; no variance reduction.
DspgResult run_dspg(const CompositeObjective& obj, const MixingSchedule& schedule,
                    const RunConfig& cfg, DspgStep step, long iterations, MetricsSink* sink = nullptr,
                    double f_star = std::numeric_limits<double>::quiet_NaN(), int threads = 1);

struct ReferenceResult {
  Vector x_star;
  double f_star = 0.0;
  long iterations = 0;
  double grad_map_norm = 0.0;
};

// Full proximal gradient descent with backtracking, run until the gradient
// mapping norm ||(x - prox(x - alpha grad f(x))) / alpha|| drops below tol.
ReferenceResult run_reference(const CompositeObjective& obj, double tol, long max_iterations = 500000);

}  // namespace dpsvrg

#endif
