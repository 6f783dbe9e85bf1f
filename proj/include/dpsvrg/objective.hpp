#ifndef DPSVRG_OBJECTIVE_HPP
#define DPSVRG_OBJECTIVE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dpsvrg/proximal.hpp"
#include "dpsvrg/topology.hpp"

namespace dpsvrg {

enum class LossKind { Logistic, LeastSquares };

LossKind loss_from_string(const std::string& name);
std::string to_string(LossKind kind);

// Samples plus their node partition. The partition is an equal split into
// contiguous blocks (sizes differ by at most one).
struct Dataset {
  Matrix features;  // n x d
  Vector labels;    // n; {0,1} for logistic, reals for least squares
  std::vector<std::vector<int>> node_samples;

  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  int nodes() const { return static_cast<int>(node_samples.size()); }
  bool equal_partition() const;

  void partition(int m);

  // Scales all features by 1 / max_i ||row_i||, so sample norms are <= 1.
  void scale_max_norm();

  // Dense CSV, label first: "label,x1,x2,...". Sparse libsvm-style lines:
  // "label idx:val ..." with 1-based indices. load() sniffs the format.
  static Dataset load_csv(const std::string& path, int m);
  static Dataset load_libsvm(const std::string& path, int m);
  static Dataset load(const std::string& path, int m);
  void save_csv(const std::string& path) const;
  void save_libsvm(const std::string& path) const;
};

struct SynthResult {
  Dataset data;
  Vector planted;  // the sparse weight vector behind the labels
};

// Seeded standard-Gaussian features, labels drawn from a logistic model with
// a planted `sparsity`-sparse weight vector; `noise` is the standard
// deviation of additive logit noise.
SynthResult synth_dataset(int n, int d, int sparsity, double noise, std::uint64_t seed, int m);

// F = (1/n) sum_j f^j + h with per-sample smooth losses:
//   logistic:      f^j(x) = -b_j <d_j, x> + log(1 + exp(<d_j, x>))
//   least squares: f^j(x) = (<a_j, x> - b_j)^2
class CompositeObjective {
 public:
  CompositeObjective(LossKind loss, Dataset data, Regularizer reg);

  LossKind loss() const { return loss_; }
  const Dataset& data() const { return data_; }
  const Regularizer& reg() const { return reg_; }
  int dim() const { return data_.dim(); }
  int nodes() const { return data_.nodes(); }

  double sample_loss(const Vector& x, int sample) const;
  Vector sample_grad(const Vector& x, int sample) const;

  // Mean gradient over one node's samples / over the pooled dataset.
  Vector full_grad_node(const Vector& x, int node) const;
  Vector full_grad(const Vector& x) const;

  // SVRG estimator: grad(x, l) - grad(snap_x, l) + snapshot_full.
  Vector vr_grad(const Vector& x, const Vector& snap_x, const Vector& snapshot_full, int sample) const;

  double smooth_value(const Vector& x) const;              // (1/n) sum_j f^j(x)
  double smooth_value_node(const Vector& x, int node) const;
  double value(const Vector& x) const;                     // F(x)
  double optimality_gap(const Vector& x, double f_star) const { return value(x) - f_star; }

  // Max over samples of the per-sample gradient Lipschitz constant:
  // logistic ||d||^2 / 4, least squares 2 ||a||^2.
  double smoothness_L() const;

  struct BoundConstants {
    double G_f = 0.0;  // sup ||per-sample gradient|| on the radius-R ball
    double G_h = 0.0;  // lambda sqrt(d)
    double M = 0.0;    // 2 G_f, bound on ||v - grad f||
  };
  BoundConstants bound_constants(double radius) const;

 private:
  LossKind loss_;
  Dataset data_;
  Regularizer reg_;
};

// Constants of the convergence analysis for a given step size.
struct AnalysisConstants {
  double alpha = 0.0;
  double L = 0.0;
  double delta = 0.9;
  double beta = 2.0;
  long n0 = 4;
  double M = 0.0;

  double rho() const { return 8.0 * alpha * L / (1.0 - 4.0 * alpha * L); }
  double theta() const { return 2.0 * alpha - 8.0 * alpha * alpha * L; }
  double alpha_limit() const { return delta / (L * (4.0 * delta + 8.0)); }
  bool step_condition() const { return alpha < alpha_limit(); }
  // The linear-rate theorem additionally needs rho * beta >= 2, which forces
  // beta > 2 / delta; with the default beta = 2 the pair is infeasible.
  bool linear_rate_feasible() const { return step_condition() && rho() * beta >= 2.0; }
};

}  // namespace dpsvrg

#endif
