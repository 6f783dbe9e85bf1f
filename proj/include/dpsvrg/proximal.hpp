#ifndef DPSVRG_PROXIMAL_HPP
#define DPSVRG_PROXIMAL_HPP

#include <cstdint>

#include "dpsvrg/topology.hpp"

namespace dpsvrg {

enum class RegKind { L1, Zero };

// Nonsmooth regularizer h. Only l1 (lambda * ||x||_1) and the zero function
// ship; the operations below work through the (value, prox, subgradient)
// triple so further kinds are additive.
class Regularizer {
 public:
  static Regularizer l1(double lambda);
  static Regularizer zero();

  RegKind kind() const { return kind_; }
  double lambda() const { return lambda_; }

  double value(const Vector& x) const;

  // Exact prox: argmin_y ||y - z||^2 / (2 alpha) + h(y).
  Vector prox(const Vector& z, double alpha) const;

  // G_h = lambda sqrt(d), a bound on ||subgradient|| over R^d.
  double subgrad_bound(int dim) const;

  // The member of the subdifferential at x that minimizes the reconstructed
  // proximal error <x - y, p>; y = prox(q) with the same alpha.
  Vector min_subgradient(const Vector& x, const Vector& q, const Vector& y, double alpha) const;

 private:
  Regularizer(RegKind kind, double lambda) : kind_(kind), lambda_(lambda) {}
  RegKind kind_;
  double lambda_;
};

// Componentwise soft threshold by alpha * lambda. Requires alpha > 0.
Vector prox_l1(const Vector& z, double alpha, double lambda);

// Derivative-free numerical minimizer of the prox objective (per-coordinate
// golden-section search), used as the independent oracle for the closed
// forms. `start_jitter` perturbs the initial bracket so repeated calls probe
// different internal starting points. Throws on iteration-cap overrun.
Vector prox_numeric(const Regularizer& h, const Vector& z, double alpha, double tol,
                    double start_jitter = 0.0);

struct InexactProxResult {
  Vector point;
  double achieved_eps = 0.0;
};

// A point whose prox-objective value exceeds the minimum by (at most, and up
// to rounding exactly) eps_target: the exact prox is displaced along a seeded
// random unit direction, with the displacement magnitude solved in closed
// form segment by segment. eps_target = 0 returns the exact prox.
InexactProxResult prox_inexact(const Regularizer& h, const Vector& z, double alpha,
                               double eps_target, std::uint64_t seed = 0);

// Prox-objective gap of `candidate` relative to the exact prox of z;
// nonnegative by definition, negative rounding noise is clamped to 0.
double epsilon_of(const Regularizer& h, const Vector& candidate, const Vector& z, double alpha);

// The proximal-error scalar attached to xbar as an inexact prox of qbar:
// ||xbar - y||^2 / (2 alpha) + <xbar - y, (y - qbar)/alpha + p> with
// y = prox(qbar) and p the minimizing subgradient at xbar. Always >= the
// true prox-objective gap; clamped at 0.
double inexact_prox_epsilon(const Regularizer& h, const Vector& xbar, const Vector& qbar, double alpha);

}  // namespace dpsvrg

#endif
