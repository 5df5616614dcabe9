#pragma once

// Compactly supported C^k functions with explicit derivatives: the plateau
// approximations of an indicator and the weighted functions (lambda + x)^q g.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include "rso/error.hpp"

namespace rso {

/// Polynomial in ascending-power coefficients.
struct Poly {
  std::vector<double> c;

  double eval(double t) const {
    double acc = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
    return acc;
  }
  Poly derivative() const {
    if (c.size() <= 1) return Poly{{0.0}};
    Poly d{std::vector<double>(c.size() - 1)};
    for (std::size_t k = 1; k < c.size(); ++k) d.c[k - 1] = static_cast<double>(k) * c[k];
    return d;
  }
};

/// Generalised smoothstep of order N: 0 -> 1 on [0, 1] with its first N
/// derivatives vanishing at both ends (degree 2N + 1).
inline Poly smoothstep(int N) {
  Poly p{std::vector<double>(2 * N + 2, 0.0)};
  for (int j = 0; j <= N; ++j) {
    const double coef = boost::math::binomial_coefficient<double>(N + j, j) *
                        boost::math::binomial_coefficient<double>(2 * N + 1, N - j);
    p.c[N + 1 + j] += (j % 2 ? -1.0 : 1.0) * coef;
  }
  return p;
}

/// f in C_0^k(R) given by derivative evaluators f^(r), r = 0..k, with
/// support [a, b]. Sup-norms are sampled on every smooth piece.
class SmoothCompactFunction {
 public:
  using Deriv = std::function<double(int r, double x)>;

  SmoothCompactFunction(double a, double b, int max_order, Deriv deriv,
                        std::vector<double> breakpoints = {}, int samples_per_piece = 2048)
      : a_(a), b_(b), k_(max_order), f_(std::move(deriv)), breaks_(std::move(breakpoints)) {
    require(a < b, "SmoothCompactFunction: support must have a < b");
    require(max_order >= 0, "SmoothCompactFunction: max_order must be >= 0");
    breaks_.push_back(a);
    breaks_.push_back(b);
    std::sort(breaks_.begin(), breaks_.end());
    breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
    sup_.assign(static_cast<std::size_t>(k_ + 1), 0.0);
    for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
      const double lo = breaks_[p], hi = breaks_[p + 1];
      for (int s = 0; s <= samples_per_piece; ++s) {
        const double x = lo + (hi - lo) * s / samples_per_piece;
        for (int r = 0; r <= k_; ++r) sup_[r] = std::max(sup_[r], std::abs(f_(r, x)));
      }
    }
  }

  double operator()(double x) const { return deriv(0, x); }
  /// f^(r)(x); zero outside the support.
  double deriv(int r, double x) const {
    if (r > k_) throw ValidationError("SmoothCompactFunction: derivative order exceeds max_order");
    if (x < a_ || x > b_) return 0.0;
    return f_(r, x);
  }

  double lo() const { return a_; }
  double hi() const { return b_; }
  double support_length() const { return b_ - a_; }
  int max_order() const { return k_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  /// Sampled sup-norm of f^(r).
  double sup_norm(int r) const { return sup_.at(static_cast<std::size_t>(r)); }
  /// |||f|||_n = sum_{r <= n} ||f^(r)||_inf.
  double seminorm(int n) const {
    require(n <= k_, "SmoothCompactFunction: seminorm order exceeds max_order");
    double s = 0;
    for (int r = 0; r <= n; ++r) s += sup_[r];
    return s;
  }

 private:
  double a_, b_;
  int k_;
  Deriv f_;
  std::vector<double> breaks_;
  std::vector<double> sup_;
};

/// Plateau approximation of the indicator of [0, E]: g = 1 on [0, E],
/// support [-E/2, 3E/2], smoothstep shoulders of width E/2 and order n + 1,
/// so g is C^{n+1} and ||g^(r)|| scales exactly like E^{-r}.
inline SmoothCompactFunction plateau_function(double E, int n) {
  require(E > 0, "plateau_function: E must be > 0");
  require(n >= 1, "plateau_function: order n must be >= 1");
  const int N = n + 1;
  auto derivs = std::make_shared<std::vector<Poly>>();
  derivs->push_back(smoothstep(N));
  for (int r = 1; r <= N; ++r) derivs->push_back(derivs->back().derivative());
  const double w = 0.5 * E;
  auto f = [derivs, E, w](int r, double x) -> double {
    const double scale = std::pow(w, -r);
    if (x < 0.0) return scale * (*derivs)[r].eval((x + w) / w);
    if (x <= E) return r == 0 ? 1.0 : 0.0;
    const double v = -scale * (*derivs)[r].eval((x - E) / w);  // 1 - S((x - E)/w)
    return r == 0 ? 1.0 + v : v;
  };
  return SmoothCompactFunction(-w, E + w, N, f, {0.0, E});
}

/// a f + b g, with the union of supports and breakpoints.
inline SmoothCompactFunction linear_combination(double a, const SmoothCompactFunction& f, double b,
                                                const SmoothCompactFunction& g) {
  const int k = std::min(f.max_order(), g.max_order());
  std::vector<double> br = f.breakpoints();
  br.insert(br.end(), g.breakpoints().begin(), g.breakpoints().end());
  auto h = [a, b, f, g](int r, double x) { return a * f.deriv(r, x) + b * g.deriv(r, x); };
  return SmoothCompactFunction(std::min(f.lo(), g.lo()), std::max(f.hi(), g.hi()), k, h, br);
}

struct ShiftedWeight {
  SmoothCompactFunction f;
  double c4 = 0;            ///< Leibniz constant: |||f|||_k <= c4 |||g|||_k
  double seminorm_ratio = 0;  ///< measured |||f|||_k / |||g|||_k
};

/// f = (lambda + x)^q g with derivatives by Leibniz' rule, k = max order of g.
inline ShiftedWeight shifted_weight(const SmoothCompactFunction& g, double lambda, int q) {
  require(q >= 0, "shifted_weight: q must be >= 0");
  require(lambda + g.lo() > 0, "shifted_weight: lambda + x must be > 0 on supp g");
  const int k = g.max_order();
  auto pw = [q](int j, double base) {
    if (j > q) return 0.0;
    return boost::math::factorial<double>(q) / boost::math::factorial<double>(q - j) *
           std::pow(base, q - j);
  };
  auto f = [g, lambda, q, pw](int r, double x) {
    double acc = 0;
    for (int j = 0; j <= std::min(r, q); ++j)
      acc += boost::math::binomial_coefficient<double>(r, j) * pw(j, lambda + x) * g.deriv(r - j, x);
    return acc;
  };
  std::vector<double> inner(g.breakpoints().begin() + 1, g.breakpoints().end() - 1);
  SmoothCompactFunction fx(g.lo(), g.hi(), k, f, inner);
  const double top = std::max(std::abs(lambda + g.lo()), std::abs(lambda + g.hi()));
  double c4 = 0;
  for (int s = 0; s <= k; ++s) {
    double acc = 0;
    for (int j = 0; j <= k - s; ++j)
      acc += boost::math::binomial_coefficient<double>(s + j, j) * pw(j, top);
    c4 = std::max(c4, acc);
  }
  const double ratio = fx.seminorm(k) / g.seminorm(k);
  if (ratio > c4 * (1 + 1e-12))
    throw NumericalError("shifted_weight: Leibniz bound violated (ratio > C4)");
  return ShiftedWeight{std::move(fx), c4, ratio};
}

}  // namespace rso
