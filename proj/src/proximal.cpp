#include "dpsvrg/proximal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dpsvrg/rng.hpp"

namespace dpsvrg {

namespace {

double prox_objective(const Regularizer& h, const Vector& y, const Vector& z, double alpha) {
  return (y - z).squaredNorm() / (2.0 * alpha) + h.value(y);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

Regularizer Regularizer::l1(double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("Regularizer::l1: lambda must be >= 0");
  return Regularizer(RegKind::L1, lambda);
}

Regularizer Regularizer::zero() { return Regularizer(RegKind::Zero, 0.0); }

double Regularizer::value(const Vector& x) const {
  return kind_ == RegKind::L1 ? lambda_ * x.lpNorm<1>() : 0.0;
}

Vector Regularizer::prox(const Vector& z, double alpha) const {
  if (!(alpha > 0.0)) throw std::invalid_argument("Regularizer::prox: alpha must be > 0");
  return kind_ == RegKind::L1 ? prox_l1(z, alpha, lambda_) : z;
}

double Regularizer::subgrad_bound(int dim) const {
  return kind_ == RegKind::L1 ? lambda_ * std::sqrt(static_cast<double>(dim)) : 0.0;
}

Vector Regularizer::min_subgradient(const Vector& x, const Vector& q, const Vector& y, double alpha) const {
  Vector p = Vector::Zero(x.size());
  if (kind_ == RegKind::Zero) return p;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) {
      p[j] = x[j] > 0.0 ? lambda_ : -lambda_;
    } else {
      // Free coordinate: (q_j - y_j)/alpha is the exact-prox subgradient,
      // which minimizes <x - y, p> over [-lambda, lambda].
      p[j] = std::clamp((q[j] - y[j]) / alpha, -lambda_, lambda_);
    }
  }
  return p;
}

Vector prox_l1(const Vector& z, double alpha, double lambda) {
  if (!(alpha > 0.0)) throw std::invalid_argument("prox_l1: alpha must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("prox_l1: lambda must be >= 0");
  const double t = alpha * lambda;
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = soft_threshold(z[i], t);
  return out;
}

Vector prox_numeric(const Regularizer& h, const Vector& z, double alpha, double tol, double start_jitter) {
  if (!(alpha > 0.0)) throw std::invalid_argument("prox_numeric: alpha must be > 0");
  if (!(tol > 0.0)) throw std::invalid_argument("prox_numeric: tol must be > 0");
  const double lambda = h.kind() == RegKind::L1 ? h.lambda() : 0.0;
  const double per_coord = tol / (4.0 * std::sqrt(static_cast<double>(std::max<Eigen::Index>(z.size(), 1))));
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // Coordinate-wise bisection on the monotone subderivative of the prox
    // objective (y - z_i)/alpha + lambda sgn(y); the minimizer is where the
    // one-sided derivatives straddle zero.
    double lo = std::min(z[i], 0.0) - alpha * lambda - 1.0 - std::abs(start_jitter);
    double hi = std::max(z[i], 0.0) + alpha * lambda + 1.0 + 0.37 * std::abs(start_jitter);
    auto d_right = [&](double y) { return (y - z[i]) / alpha + (y >= 0.0 ? lambda : -lambda); };
    auto d_left = [&](double y) { return (y - z[i]) / alpha + (y > 0.0 ? lambda : -lambda); };
    int iter = 0;
    while (hi - lo > per_coord) {
      if (++iter > 500) throw std::runtime_error("prox_numeric: iteration cap exceeded");
      const double mid = 0.5 * (lo + hi);
      if (d_right(mid) < 0.0) {
        lo = mid;  // minimizer lies strictly right of mid
      } else if (d_left(mid) > 0.0) {
        hi = mid;  // strictly left
      } else {
        lo = hi = mid;  // mid satisfies the optimality condition
      }
    }
    out[i] = 0.5 * (lo + hi);
  }
  return out;
}

InexactProxResult prox_inexact(const Regularizer& h, const Vector& z, double alpha,
                               double eps_target, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("prox_inexact: alpha must be > 0");
  if (eps_target < 0.0) throw std::invalid_argument("prox_inexact: eps_target must be >= 0");
  Vector y = h.prox(z, alpha);
  if (eps_target == 0.0) return {std::move(y), 0.0};

  Rng rng(Rng::splitmix64(seed) ^ 0x70726f78ULL);
  Vector u(z.size());
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
    norm = u.norm();
  }
  u /= norm;

  // Along x(t) = y + t u the gap g(t) = P(x(t)) - P(y) is convex, g(0) = 0
  // and nondecreasing for t >= 0; between kinks of |y_j + t u_j| it is an
  // explicit quadratic, so the crossing g(t) = eps is solved exactly.
  const double lambda = h.lambda();
  const double a = 1.0 / (2.0 * alpha);
  double b = u.dot(y - z) / alpha;
  if (h.kind() == RegKind::L1)
    for (Eigen::Index j = 0; j < y.size(); ++j)
      b += lambda * (y[j] != 0.0 ? (y[j] > 0.0 ? u[j] : -u[j]) : std::abs(u[j]));

  std::vector<std::pair<double, double>> kinks;  // (t, slope increase at t)
  if (h.kind() == RegKind::L1)
    for (Eigen::Index j = 0; j < y.size(); ++j)
      if (y[j] != 0.0 && u[j] != 0.0) {
        const double t = -y[j] / u[j];
        if (t > 0.0) kinks.emplace_back(t, 2.0 * lambda * std::abs(u[j]));
      }
  std::sort(kinks.begin(), kinks.end());

  double t0 = 0.0, g0 = 0.0, slope = b, t_star = -1.0;
  std::size_t next = 0;
  while (true) {
    const double t1 = next < kinks.size() ? kinks[next].first : std::numeric_limits<double>::infinity();
    // on [t0, t1): g(t) = g0 + slope (t - t0) + a (t^2 - t0^2) ... expressed
    // relative to t0 as a dt^2 + (slope + 2 a t0) dt + g0
    const double lin = slope + 2.0 * a * t0;
    const double disc = lin * lin + 4.0 * a * (eps_target - g0);
    if (disc >= 0.0) {
      const double dt = (-lin + std::sqrt(disc)) / (2.0 * a);
      if (dt >= 0.0 && t0 + dt <= t1) {
        t_star = t0 + dt;
        break;
      }
    }
    if (next >= kinks.size()) break;
    const double dt1 = t1 - t0;
    g0 += slope * dt1 + a * dt1 * dt1 + 2.0 * a * t0 * dt1;
    slope += kinks[next].second;
    t0 = t1;
    ++next;
  }
  if (t_star < 0.0) throw std::runtime_error("prox_inexact: no crossing found");

  Vector x = y + t_star * u;
  double achieved = epsilon_of(h, x, z, alpha);
  // Guard against rounding pushing the gap above the target.
  int shrink = 0;
  while (achieved > eps_target && shrink < 64) {
    t_star *= 1.0 - 1e-12 * static_cast<double>(1 << shrink);
    x = y + t_star * u;
    achieved = epsilon_of(h, x, z, alpha);
    ++shrink;
  }
  if (achieved > eps_target) throw std::runtime_error("prox_inexact: could not meet eps_target");
  return {std::move(x), achieved};
}

double epsilon_of(const Regularizer& h, const Vector& candidate, const Vector& z, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("epsilon_of: alpha must be > 0");
  const Vector y = h.prox(z, alpha);
  const double gap = prox_objective(h, candidate, z, alpha) - prox_objective(h, y, z, alpha);
  return gap > 0.0 ? gap : 0.0;
}

double inexact_prox_epsilon(const Regularizer& h, const Vector& xbar, const Vector& qbar, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("inexact_prox_epsilon: alpha must be > 0");
  const Vector y = h.prox(qbar, alpha);
  const Vector d = xbar - y;
  const Vector p = h.min_subgradient(xbar, qbar, y, alpha);
  const double eps = d.squaredNorm() / (2.0 * alpha) + d.dot((y - qbar) / alpha + p);
  return eps > 0.0 ? eps : 0.0;
}

}  // namespace dpsvrg
