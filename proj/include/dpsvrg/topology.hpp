#ifndef DPSVRG_TOPOLOGY_HPP
#define DPSVRG_TOPOLOGY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dpsvrg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Topology families for generated schedules.
//   RingSplit:      the ring's edges are assigned round-robin to the b slots,
//                   so only the union over a full window is connected.
//   RandomMatching: a random disjoint matching per slot, completed with extra
//                   edges until every window union is connected.
//   Static:         b = 1, a fixed ring.
//   Complete:       b = 1, the complete graph (uniform 1/m weights).
enum class TopologyFamily { RingSplit, RandomMatching, Static, Complete };

TopologyFamily family_from_string(const std::string& name);
std::string to_string(TopologyFamily family);

// Throws std::invalid_argument unless w is doubly stochastic (row/column sums
// within tol of 1), entry-wise nonnegative with every positive entry >= eta,
// has a symmetric zero pattern and a strictly positive diagonal.
void validate_mixing_matrix(const Matrix& w, double eta, double tol = 1e-12);

// Metropolis weights for an undirected edge list: w_ij = 1/(1 + max(deg_i,
// deg_j)) on edges, diagonal takes the remainder. Doubly stochastic by
// construction with a strictly positive diagonal.
Matrix metropolis_matrix(int m, const std::vector<std::pair<int, int>>& edges);

// True when the union of the given edge sets connects all m nodes.
bool union_connected(int m, const std::vector<std::vector<std::pair<int, int>>>& edge_sets);

// A periodic, b-connected stream of doubly stochastic mixing matrices plus
// the constants of the geometric consensus bound. The stream is infinite:
// matrix_at(t) returns the stored matrix for t mod period.
class MixingSchedule {
 public:
  static MixingSchedule make(int m, int b, double eta, TopologyFamily family, std::uint64_t seed);

  int node_count() const { return m_; }
  int window() const { return b_; }
  double eta() const { return eta_; }
  TopologyFamily family() const { return family_; }
  std::uint64_t seed() const { return seed_; }
  int period() const { return static_cast<int>(matrices_.size()); }
  const Matrix& matrix_at(long t) const { return matrices_[static_cast<std::size_t>(t % period())]; }
  const std::vector<Matrix>& matrices() const { return matrices_; }

  // Smallest positive entry over all stored matrices.
  double realized_min_weight() const { return realized_min_weight_; }

  // Consensus-bound constants: b0 = (m-1) b, gamma = 1 - eta^b0 and
  // Gamma = 2 (1 + eta^-b0). gamma and Gamma are kept in log form because
  // eta^b0 under/overflows double for large windows; gamma() and big_gamma()
  // round accordingly (gamma to 1, Gamma to +inf) in those regimes.
  long b0() const { return b0_; }
  double log_eta_pow_b0() const { return log_eta_pow_b0_; }
  double gamma() const;
  double log_gamma() const;
  double big_gamma() const;
  double log_big_gamma() const;

  // Gamma * gamma^span.
  double consensus_bound(long span) const;

  // Product of `count` consecutive stream matrices starting at step `start`,
  // latest step leftmost: W^{start+count-1} ... W^{start}. Uses the periodic
  // structure (cached partial products + binary powering) for large counts.
  Matrix aggregated(long start, long count) const;

  // Text form: header "m b eta family seed", then one matrix per block as
  // whitespace-separated rows. Values carry 17 significant digits so the
  // round-trip is bit-exact.
  void save(std::ostream& out) const;
  static MixingSchedule load(std::istream& in);

 private:
  MixingSchedule() = default;
  void finalize();  // derives constants and caches, validates invariants

  int m_ = 0;
  int b_ = 0;
  double eta_ = 0.0;
  TopologyFamily family_ = TopologyFamily::Static;
  std::uint64_t seed_ = 0;
  std::vector<Matrix> matrices_;
  double realized_min_weight_ = 0.0;
  long b0_ = 0;
  double log_eta_pow_b0_ = 0.0;
  std::vector<Matrix> prefix_;  // prefix_[r] = M[r-1] ... M[0]
  std::vector<Matrix> suffix_;  // suffix_[o] = M[p-1] ... M[o]
};

struct AggregatedMatrix {
  Matrix entries;
  long l = 0;
  long g = 0;
};

// Phi(l, g) = W^g W^{g-1} ... W^l. Requires l <= g.
AggregatedMatrix phi(const MixingSchedule& schedule, long l, long g);

// Gamma * gamma^span for the schedule's constants. Requires span >= 0.
double consensus_bound(const MixingSchedule& schedule, long span);

// One gossip step: out_i = sum_j w_ij in_j. Preserves the network average.
std::vector<Vector> gossip_once(const std::vector<Vector>& params, const Matrix& w);

// `rounds` consecutive gossip steps with the stream matrices starting at
// start_step. Returns the averaged vectors and the advanced stream position.
std::pair<std::vector<Vector>, long> multi_consensus(const std::vector<Vector>& params,
                                                     const MixingSchedule& schedule,
                                                     long start_step, long rounds);

}  // namespace dpsvrg

#endif
