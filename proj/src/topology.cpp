#include "dpsvrg/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dpsvrg/rng.hpp"

namespace dpsvrg {

namespace {

void format_double(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

std::vector<std::pair<int, int>> ring_edges(int m) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) edges.emplace_back(i, (i + 1) % m);
  if (m == 2) edges.resize(1);  // a 2-ring is a single edge
  return edges;
}

}  // namespace

TopologyFamily family_from_string(const std::string& name) {
  if (name == "ring-split") return TopologyFamily::RingSplit;
  if (name == "random-matching") return TopologyFamily::RandomMatching;
  if (name == "static") return TopologyFamily::Static;
  if (name == "complete") return TopologyFamily::Complete;
  throw std::invalid_argument("unknown topology family: " + name);
}

std::string to_string(TopologyFamily family) {
  switch (family) {
    case TopologyFamily::RingSplit: return "ring-split";
    case TopologyFamily::RandomMatching: return "random-matching";
    case TopologyFamily::Static: return "static";
    case TopologyFamily::Complete: return "complete";
  }
  return "?";
}

void validate_mixing_matrix(const Matrix& w, double eta, double tol) {
  const int m = static_cast<int>(w.rows());
  if (w.cols() != m) throw std::invalid_argument("mixing matrix must be square");
  for (int i = 0; i < m; ++i) {
    if (std::abs(w.row(i).sum() - 1.0) > tol)
      throw std::invalid_argument("mixing matrix row " + std::to_string(i) + " does not sum to 1");
    if (std::abs(w.col(i).sum() - 1.0) > tol)
      throw std::invalid_argument("mixing matrix column " + std::to_string(i) + " does not sum to 1");
    if (w(i, i) <= 0.0)
      throw std::invalid_argument("mixing matrix diagonal entry " + std::to_string(i) + " must be positive");
    for (int j = 0; j < m; ++j) {
      const double v = w(i, j);
      if (v < 0.0) throw std::invalid_argument("mixing matrix has a negative entry");
      if (v > 0.0 && v < eta)
        throw std::invalid_argument("mixing matrix entry below the positive-weight floor");
      if ((v > 0.0) != (w(j, i) > 0.0))
        throw std::invalid_argument("mixing matrix zero pattern is not symmetric");
    }
  }
}

Matrix metropolis_matrix(int m, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> deg(static_cast<std::size_t>(m), 0);
  for (const auto& [a, b] : edges) {
    if (a == b || a < 0 || b < 0 || a >= m || b >= m)
      throw std::invalid_argument("bad edge in metropolis_matrix");
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  Matrix w = Matrix::Zero(m, m);
  for (const auto& [a, b] : edges) {
    const double v = 1.0 / (1.0 + std::max(deg[static_cast<std::size_t>(a)], deg[static_cast<std::size_t>(b)]));
    w(a, b) += v;
    w(b, a) += v;
  }
  for (int i = 0; i < m; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

bool union_connected(int m, const std::vector<std::vector<std::pair<int, int>>>& edge_sets) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
  for (const auto& edges : edge_sets)
    for (const auto& [a, b] : edges) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : adj[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = 1;
        ++count;
        stack.push_back(u);
      }
  }
  return count == m;
}

MixingSchedule MixingSchedule::make(int m, int b, double eta, TopologyFamily family, std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("make_schedule: m must be >= 2");
  if (b < 1) throw std::invalid_argument("make_schedule: b must be >= 1");
  if (!(eta > 0.0) || eta * m > 1.0)
    throw std::invalid_argument("make_schedule: eta must satisfy 0 < eta <= 1/m");
  if ((family == TopologyFamily::Static || family == TopologyFamily::Complete) && b != 1)
    throw std::invalid_argument("make_schedule: static families require b = 1");

  std::vector<std::vector<std::pair<int, int>>> slots(static_cast<std::size_t>(b));
  switch (family) {
    case TopologyFamily::Static:
      slots[0] = ring_edges(m);
      break;
    case TopologyFamily::Complete:
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) slots[0].emplace_back(i, j);
      break;
    case TopologyFamily::RingSplit: {
      const auto ring = ring_edges(m);
      for (std::size_t i = 0; i < ring.size(); ++i)
        slots[i % static_cast<std::size_t>(b)].push_back(ring[i]);
      break;
    }
    case TopologyFamily::RandomMatching: {
      Rng rng(Rng::splitmix64(seed) ^ 0x746f706fULL);
      std::vector<int> perm(static_cast<std::size_t>(m));
      for (auto& slot : slots) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = m - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
        for (int i = 0; i + 1 < m; i += 2) slot.emplace_back(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(i + 1)]);
      }
      // Complete the window to connectivity: bridge components with extra
      // edges spread round-robin over the slots.
      std::size_t slot_cursor = 0;
      while (!union_connected(m, slots)) {
        std::vector<int> comp(static_cast<std::size_t>(m), -1);
        int ncomp = 0;
        for (int v = 0; v < m; ++v) {
          if (comp[static_cast<std::size_t>(v)] >= 0) continue;
          std::vector<int> stack{v};
          comp[static_cast<std::size_t>(v)] = ncomp;
          while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& slot : slots)
              for (const auto& [a, c] : slot) {
                int other = -1;
                if (a == u) other = c;
                if (c == u) other = a;
                if (other >= 0 && comp[static_cast<std::size_t>(other)] < 0) {
                  comp[static_cast<std::size_t>(other)] = ncomp;
                  stack.push_back(other);
                }
              }
          }
          ++ncomp;
        }
        int u = -1, v = -1;
        for (int i = 0; i < m && u < 0; ++i)
          if (comp[static_cast<std::size_t>(i)] == 0) u = i;
        for (int i = 0; i < m && v < 0; ++i)
          if (comp[static_cast<std::size_t>(i)] == 1) v = i;
        slots[slot_cursor].emplace_back(u, v);
        slot_cursor = (slot_cursor + 1) % slots.size();
      }
      break;
    }
  }

  MixingSchedule s;
  s.m_ = m;
  s.b_ = b;
  s.eta_ = eta;
  s.family_ = family;
  s.seed_ = seed;
  s.matrices_.reserve(slots.size());
  for (const auto& edges : slots) s.matrices_.push_back(metropolis_matrix(m, edges));
  if (!union_connected(m, slots))
    throw std::invalid_argument("make_schedule: window union is not connected");
  s.finalize();
  return s;
}

void MixingSchedule::finalize() {
  b0_ = static_cast<long>(m_ - 1) * b_;
  log_eta_pow_b0_ = static_cast<double>(b0_) * std::log(eta_);
  if (!(log_eta_pow_b0_ < 0.0))
    throw std::invalid_argument("schedule constants: gamma must lie in (0,1)");

  realized_min_weight_ = std::numeric_limits<double>::infinity();
  for (const auto& w : matrices_) {
    validate_mixing_matrix(w, eta_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j)
        if (w(i, j) > 0.0) realized_min_weight_ = std::min(realized_min_weight_, w(i, j));
  }

  const int p = period();
  prefix_.assign(static_cast<std::size_t>(p) + 1, Matrix::Identity(m_, m_));
  for (int r = 1; r <= p; ++r)
    prefix_[static_cast<std::size_t>(r)] = matrices_[static_cast<std::size_t>(r - 1)] * prefix_[static_cast<std::size_t>(r - 1)];
  suffix_.assign(static_cast<std::size_t>(p), Matrix::Identity(m_, m_));
  suffix_[static_cast<std::size_t>(p - 1)] = matrices_[static_cast<std::size_t>(p - 1)];
  for (int o = p - 2; o >= 0; --o)
    suffix_[static_cast<std::size_t>(o)] = suffix_[static_cast<std::size_t>(o + 1)] * matrices_[static_cast<std::size_t>(o)];
}

double MixingSchedule::gamma() const { return -std::expm1(log_eta_pow_b0_); }

double MixingSchedule::log_gamma() const {
  const double etapow = std::exp(log_eta_pow_b0_);
  return std::log1p(-etapow);
}

double MixingSchedule::big_gamma() const { return std::exp(log_big_gamma()); }

double MixingSchedule::log_big_gamma() const {
  // log(2 (1 + eta^-b0)) = log 2 - log_eta_pow_b0 + log1p(eta^b0)
  return std::log(2.0) - log_eta_pow_b0_ + std::log1p(std::exp(log_eta_pow_b0_));
}

double MixingSchedule::consensus_bound(long span) const {
  if (span < 0) throw std::invalid_argument("consensus_bound: span must be >= 0");
  return std::exp(log_big_gamma() + static_cast<double>(span) * log_gamma());
}

Matrix MixingSchedule::aggregated(long start, long count) const {
  if (count < 0) throw std::invalid_argument("aggregated: count must be >= 0");
  if (start < 0) throw std::invalid_argument("aggregated: start must be >= 0");
  const int p = period();
  if (count <= 4L * p) {
    Matrix acc = Matrix::Identity(m_, m_);
    for (long t = start; t < start + count; ++t) acc = matrix_at(t) * acc;
    return acc;
  }
  const long o = start % p;
  const long head = (p - o) % p;
  const long q = (count - head) / p;
  const long tail = (count - head) % p;
  Matrix pow = Matrix::Identity(m_, m_);
  Matrix base = prefix_[static_cast<std::size_t>(p)];
  long e = q;
  while (e > 0) {
    if (e & 1) pow = pow * base;
    base = base * base;
    e >>= 1;
  }
  Matrix acc = pow;
  if (head > 0) acc = acc * suffix_[static_cast<std::size_t>(o)];
  if (tail > 0) acc = prefix_[static_cast<std::size_t>(tail)] * acc;
  return acc;
}

void MixingSchedule::save(std::ostream& out) const {
  out << m_ << ' ' << b_ << ' ';
  format_double(out, eta_);
  out << ' ' << to_string(family_) << ' ' << seed_ << '\n';
  for (const auto& w : matrices_) {
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < m_; ++j) {
        if (j) out << ' ';
        format_double(out, w(i, j));
      }
      out << '\n';
    }
    out << '\n';
  }
}

MixingSchedule MixingSchedule::load(std::istream& in) {
  MixingSchedule s;
  std::string family;
  if (!(in >> s.m_ >> s.b_ >> s.eta_ >> family >> s.seed_))
    throw std::invalid_argument("schedule load: malformed header");
  s.family_ = family_from_string(family);
  s.matrices_.assign(static_cast<std::size_t>(s.b_), Matrix());
  for (auto& w : s.matrices_) {
    w.resize(s.m_, s.m_);
    for (int i = 0; i < s.m_; ++i)
      for (int j = 0; j < s.m_; ++j)
        if (!(in >> w(i, j))) throw std::invalid_argument("schedule load: truncated matrix block");
  }
  s.finalize();
  return s;
}

AggregatedMatrix phi(const MixingSchedule& schedule, long l, long g) {
  if (l > g) throw std::invalid_argument("phi: requires l <= g");
  return AggregatedMatrix{schedule.aggregated(l, g - l + 1), l, g};
}

double consensus_bound(const MixingSchedule& schedule, long span) { return schedule.consensus_bound(span); }

std::vector<Vector> gossip_once(const std::vector<Vector>& params, const Matrix& w) {
  const int m = static_cast<int>(params.size());
  if (w.rows() != m || w.cols() != m)
    throw std::invalid_argument("gossip_once: matrix size does not match node count");
  for (const auto& v : params)
    if (v.size() != params.front().size()) throw std::invalid_argument("gossip_once: vector dimension mismatch");
  std::vector<Vector> out(params.size(), Vector::Zero(params.front().size()));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (w(i, j) != 0.0) out[static_cast<std::size_t>(i)] += w(i, j) * params[static_cast<std::size_t>(j)];
  return out;
}

std::pair<std::vector<Vector>, long> multi_consensus(const std::vector<Vector>& params,
                                                     const MixingSchedule& schedule,
                                                     long start_step, long rounds) {
  if (rounds < 1) throw std::invalid_argument("multi_consensus: rounds must be >= 1");
  std::vector<Vector> state = params;
  for (long r = 0; r < rounds; ++r) state = gossip_once(state, schedule.matrix_at(start_step + r));
  return {std::move(state), start_step + rounds};
}

}  // namespace dpsvrg
