#pragma once

// Almost analytic extensions and the Helffer-Sjostrand functional calculus
//
//   f(A) = -(1/pi) \iint dbar f~(x, y) ((x + iy) - A)^{-1} dx dy
//
// for Hermitian matrices A, with an eigendecomposition oracle for comparison.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include "rso/disorder.hpp"
#include "rso/error.hpp"
#include "rso/grid.hpp"
#include "rso/parallel.hpp"
#include "rso/smooth_function.hpp"

namespace rso {

inline double bracket(double x) { return std::sqrt(x * x + 1.0); }

/// t = 1 on |x| <= 1, 0 on |x| >= 2, quintic smoothstep in between
/// (max slope 15/8).
class CutoffFunction {
 public:
  double operator()(double x) const {
    const double a = std::abs(x);
    if (a <= 1.0) return 1.0;
    if (a >= 2.0) return 0.0;
    const double u = a - 1.0;
    return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  }
  double derivative(double x) const {
    const double a = std::abs(x);
    if (a <= 1.0 || a >= 2.0) return 0.0;
    const double u = a - 1.0;
    const double ds = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    return x > 0 ? -ds : ds;
  }
  /// Sampled max |t'| and checks of the plateau / support properties.
  double max_slope(int samples = 20001) const {
    double m = 0;
    for (int i = 0; i <= samples; ++i) m = std::max(m, std::abs(derivative(-3.0 + 6.0 * i / samples)));
    return m;
  }
  bool verify(int samples = 20001) const {
    for (int i = 0; i <= samples; ++i) {
      const double x = -3.0 + 6.0 * i / samples;
      const double v = (*this)(x);
      if (std::abs(x) < 1.0 && v != 1.0) return false;
      if (std::abs(x) > 2.0 && v != 0.0) return false;
      if (v < 0.0 || v > 1.0) return false;
    }
    return max_slope(samples) <= 2.0;
  }
};

/// f~_n(x, y) = (sum_{r<=n} f^(r)(x) (iy)^r / r!) t(y / <x>).
class AlmostAnalyticExtension {
 public:
  AlmostAnalyticExtension(SmoothCompactFunction f, int n, CutoffFunction t = {})
      : f_(std::move(f)), n_(n), t_(t) {
    require(n >= 0, "extend: order n must be >= 0");
    require(f_.max_order() >= n + 1, "extend: f needs derivatives up to order n + 1");
  }

  const SmoothCompactFunction& source() const { return f_; }
  int order() const { return n_; }
  const CutoffFunction& cutoff() const { return t_; }

  double s(double x, double y) const { return t_(y / bracket(x)); }
  /// (s_x, s_y) from t'.
  std::array<double, 2> grad_s(double x, double y) const {
    const double b = bracket(x);
    const double tp = t_.derivative(y / b);
    return {-tp * y * x / (b * b * b), tp / b};
  }

  /// sum_{r<=n} f^(r)(x) (iy)^r / r!
  std::complex<double> taylor(double x, double y) const {
    std::complex<double> acc = 0, iy_r = 1;
    double fact = 1;
    for (int r = 0; r <= n_; ++r) {
      if (r > 0) {
        iy_r *= std::complex<double>(0, y);
        fact *= r;
      }
      acc += f_.deriv(r, x) * iy_r / fact;
    }
    return acc;
  }

  std::complex<double> operator()(double x, double y) const {
    if (x < f_.lo() || x > f_.hi()) return 0.0;
    return taylor(x, y) * s(x, y);
  }

  /// d f~ / d zbar = 1/2 (d_x + i d_y) f~.
  std::complex<double> dbar(double x, double y) const {
    if (x < f_.lo() || x > f_.hi()) return 0.0;
    const double sv = s(x, y);
    std::complex<double> out = 0;
    if (sv != 0.0) {
      const double top = f_.deriv(n_ + 1, x);
      if (top != 0.0)
        out += 0.5 * top * std::pow(std::complex<double>(0, y), n_) /
               boost::math::factorial<double>(static_cast<unsigned>(n_)) * sv;
    }
    const auto g = grad_s(x, y);
    if (g[0] != 0.0 || g[1] != 0.0) out += 0.5 * std::complex<double>(g[0], g[1]) * taylor(x, y);
    return out;
  }

 private:
  SmoothCompactFunction f_;
  int n_;
  CutoffFunction t_;
};

inline AlmostAnalyticExtension extend(const SmoothCompactFunction& f, int n,
                                      CutoffFunction t = {}) {
  return AlmostAnalyticExtension(f, n, t);
}

struct DbarBoundReport {
  long samples = 0;
  long violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();  ///< min (bound - |dbar|)
  double max_ratio = 0;  ///< max |dbar| / bound over samples with bound > 0
  double max_near_axis_mismatch = 0;  ///< |y| <= 1: | |dbar|/|y|^n - |f^(n+1)|/(2 n!) |
  std::string first_violation;
  bool pass() const { return violations == 0; }
};

/// Scans a uniform nx x ny grid of [x_lo, x_hi] x [-y_max, y_max]. Zero or
/// negative ranges default to supp f padded by a quarter and |y| <= 1.1 (2R+2).
inline DbarBoundReport dbar_bound_check(const AlmostAnalyticExtension& ext, int nx = 200,
                                        int ny = 200, double x_lo = 0, double x_hi = 0,
                                        double y_max = 0) {
  require(nx >= 2 && ny >= 2, "dbar_bound_check: grid needs at least 2 points per axis");
  const auto& f = ext.source();
  const int n = ext.order();
  if (!(x_hi > x_lo)) {
    const double pad = 0.25 * f.support_length();
    x_lo = f.lo() - pad;
    x_hi = f.hi() + pad;
  }
  const double R = std::max(std::abs(f.lo()), std::abs(f.hi()));
  if (!(y_max > 0)) y_max = 1.1 * (2 * R + 2);
  const double nfact = boost::math::factorial<double>(static_cast<unsigned>(n));
  DbarBoundReport rep;
  for (int i = 0; i < nx; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / (nx - 1);
    const double bx = bracket(x);
    for (int j = 0; j < ny; ++j) {
      const double y = -y_max + 2 * y_max * j / (ny - 1);
      const double lhs = std::abs(ext.dbar(x, y));
      const double ay = std::abs(y);
      double rhs = std::abs(f.deriv(n + 1, x) * ext.s(x, y)) * std::pow(ay, n) / (2 * nfact);
      if (bx < ay && ay < 2 * bx) {
        double sum = 0, fact = 1;
        for (int r = 0; r <= n; ++r) {
          if (r > 0) fact *= r;
          sum += std::abs(f.deriv(r, x)) * std::pow(ay, r) / fact;
        }
        rhs += 3.0 / bx * sum;
      }
      ++rep.samples;
      rep.min_slack = std::min(rep.min_slack, rhs - lhs);
      if (rhs > 0) rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
      if (lhs > rhs * (1 + 1e-12) + std::numeric_limits<double>::min()) {
        if (rep.violations == 0) {
          std::ostringstream os;
          os.precision(10);
          os << "|dbar| = " << lhs << " > " << rhs << " at (x, y) = (" << x << ", " << y << ")";
          rep.first_violation = os.str();
        }
        ++rep.violations;
      }
      if (ay <= 1.0 && ay > 0.0) {
        const double lhs_n = lhs / std::pow(ay, n);
        const double ref = std::abs(f.deriv(n + 1, x)) / (2 * nfact);
        rep.max_near_axis_mismatch = std::max(rep.max_near_axis_mismatch, std::abs(lhs_n - ref));
      }
    }
  }
  return rep;
}

enum class QuadratureScheme { GaussPanels, Midpoint };

/// Layout of the (x, y) quadrature. In each smooth piece of f, x uses
/// `x_panels` panels; y is written as y = <x> eta with eta in (0, 1] split
/// geometrically toward 0 (`y_levels` levels of ratio `y_ratio`) and eta in
/// [1, 2] split into `y_outer_panels`. Each panel carries 8 nodes.
struct QuadratureSpec {
  static constexpr int kNodesPerPanel = 8;

  QuadratureScheme scheme = QuadratureScheme::GaussPanels;
  int x_panels = 4;
  int y_levels = 16;
  double y_ratio = 0.5;
  int y_outer_panels = 1;
  double eps_y = 0.0;  ///< excluded half-width |y| < eps_y
  /// Rectangle [x_lo, x_hi] x [-y_max, y_max]; NaN means "fit to supp f".
  double x_lo = std::numeric_limits<double>::quiet_NaN();
  double x_hi = std::numeric_limits<double>::quiet_NaN();
  double y_max = std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    require(x_panels * kNodesPerPanel >= 8, "QuadratureSpec: x resolution must be >= 8");
    require((y_levels + y_outer_panels) * kNodesPerPanel >= 8 && y_levels >= 1 && y_outer_panels >= 1,
            "QuadratureSpec: y resolution must be >= 8");
    require(y_ratio > 0 && y_ratio < 1, "QuadratureSpec: y_ratio must lie in (0, 1)");
    require(eps_y >= 0, "QuadratureSpec: eps_y must be >= 0");
  }

  /// Twice the panels on every axis.
  QuadratureSpec refined() const {
    QuadratureSpec q = *this;
    q.x_panels *= 2;
    q.y_outer_panels *= 2;
    q.y_levels *= 2;
    q.y_ratio = std::sqrt(y_ratio);
    return q;
  }
};

namespace detail {

struct Rule {
  std::vector<double> node, weight;  // on [0, 1]
};

inline const Rule& unit_rule(QuadratureScheme scheme) {
  static const Rule gauss = [] {
    using G = boost::math::quadrature::gauss<double, QuadratureSpec::kNodesPerPanel>;
    Rule r;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      r.node.push_back(0.5 - 0.5 * a[i]);
      r.weight.push_back(0.5 * w[i]);
      r.node.push_back(0.5 + 0.5 * a[i]);
      r.weight.push_back(0.5 * w[i]);
    }
    return r;
  }();
  static const Rule mid = [] {
    Rule r;
    const int m = QuadratureSpec::kNodesPerPanel;
    for (int i = 0; i < m; ++i) {
      r.node.push_back((i + 0.5) / m);
      r.weight.push_back(1.0 / m);
    }
    return r;
  }();
  return scheme == QuadratureScheme::GaussPanels ? gauss : mid;
}

/// Tensor-free node list of one axis: panels [a_k, b_k] filled with the rule.
inline void add_panel(const Rule& rule, double a, double b, std::vector<double>& nodes,
                      std::vector<double>& weights) {
  if (!(b > a)) return;
  for (std::size_t i = 0; i < rule.node.size(); ++i) {
    nodes.push_back(a + (b - a) * rule.node[i]);
    weights.push_back((b - a) * rule.weight[i]);
  }
}

inline void x_nodes(const QuadratureSpec& q, const SmoothCompactFunction& f,
                    std::vector<double>& xs, std::vector<double>& wx) {
  const auto& rule = unit_rule(q.scheme);
  const auto& br = f.breakpoints();
  for (std::size_t p = 0; p + 1 < br.size(); ++p)
    for (int k = 0; k < q.x_panels; ++k) {
      const double a = br[p] + (br[p + 1] - br[p]) * k / q.x_panels;
      const double b = br[p] + (br[p + 1] - br[p]) * (k + 1) / q.x_panels;
      add_panel(rule, a, b, xs, wx);
    }
}

/// eta nodes in [eta_lo, eta_hi] subset (0, 2].
inline void eta_nodes(const QuadratureSpec& q, double eta_lo, double eta_hi,
                      std::vector<double>& es, std::vector<double>& we) {
  const auto& rule = unit_rule(q.scheme);
  auto clipped = [&](double a, double b) {
    add_panel(rule, std::max(a, eta_lo), std::min(b, eta_hi), es, we);
  };
  double top = 1.0;
  for (int k = 0; k < q.y_levels; ++k) {
    clipped(top * q.y_ratio, top);
    top *= q.y_ratio;
  }
  clipped(0.0, top);
  for (int k = 0; k < q.y_outer_panels; ++k)
    clipped(1.0 + static_cast<double>(k) / q.y_outer_panels,
            1.0 + static_cast<double>(k + 1) / q.y_outer_panels);
}

inline void check_hermitian(const Eigen::MatrixXcd& A, const char* what) {
  require(A.rows() == A.cols() && A.rows() > 0, std::string(what) + ": matrix must be square");
  const double defect = (A - A.adjoint()).cwiseAbs().maxCoeff();
  require(defect <= 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()),
          std::string(what) + ": matrix is not Hermitian");
}

}  // namespace detail

/// Sum_m f(lambda_m) P_m.
inline Eigen::MatrixXcd matrix_function_eig(const Eigen::MatrixXcd& A,
                                            const SmoothCompactFunction& f) {
  detail::check_hermitian(A, "matrix_function_eig");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
  if (es.info() != Eigen::Success) throw NumericalError("matrix_function_eig: solver failed");
  Eigen::VectorXd fv(A.rows());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv[i] = f(es.eigenvalues()[i]);
  return es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
}

/// f(A) by the Helffer-Sjostrand integral. A is reduced to a real tridiagonal
/// T = Q^* A Q once; each node solves (z - T) X = I by an unpivoted LU, which
/// is stable because Im z > 0. The y < 0 half is the adjoint of the y > 0 half
/// when f is real.
inline Eigen::MatrixXcd matrix_function_hs(const Eigen::MatrixXcd& A,
                                           const SmoothCompactFunction& f, int n,
                                           const QuadratureSpec& quad = {}, int threads = 1) {
  detail::check_hermitian(A, "matrix_function_hs");
  quad.validate();
  require(quad.eps_y > 0 || n >= 2, "matrix_function_hs: eps_y = 0 requires order n >= 2");
  const AlmostAnalyticExtension ext(f, n);
  const double R = std::max(std::abs(f.lo()), std::abs(f.hi()));
  const double x_lo = std::isnan(quad.x_lo) ? f.lo() : quad.x_lo;
  const double x_hi = std::isnan(quad.x_hi) ? f.hi() : quad.x_hi;
  const double y_max = std::isnan(quad.y_max) ? 2 * R + 2 : quad.y_max;
  require(x_lo <= f.lo() && x_hi >= f.hi() && y_max >= 2 * R + 2 - 1e-12,
          "matrix_function_hs: quadrature rectangle does not cover supp f x [-(2R+2), 2R+2]");

  const long dim = A.rows();
  Eigen::Tridiagonalization<Eigen::MatrixXcd> tri(A);
  const Eigen::VectorXd dg = tri.diagonal();
  const Eigen::VectorXd sd = tri.subDiagonal();
  const Eigen::MatrixXcd Q = tri.matrixQ();

  std::vector<double> xs, wx;
  detail::x_nodes(quad, f, xs, wx);

  auto column_sum = [&](std::size_t ix) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dim, dim);
    const double x = xs[ix];
    const double bx = bracket(x);
    std::vector<double> es, we;
    detail::eta_nodes(quad, quad.eps_y / bx, 2.0, es, we);
    std::vector<std::complex<double>> u(dim), col(dim);
    std::vector<double> ell2(dim);
    for (std::size_t k = 0; k < es.size(); ++k) {
      const double y = bx * es[k];
      const std::complex<double> c = wx[ix] * we[k] * bx * ext.dbar(x, y);
      if (c == 0.0) continue;
      const std::complex<double> z(x, y);
      // LU of z - T: pivots u_i, multipliers -e_{i-1} / u_{i-1}.
      u[0] = z - dg[0];
      for (long i = 1; i < dim; ++i) u[i] = z - dg[i] - sd[i - 1] * sd[i - 1] / u[i - 1];
      for (long i = 0; i < dim; ++i)
        if (!(std::abs(u[i]) > 1e-300))
          throw NumericalError("matrix_function_hs: singular resolvent at a quadrature node");
      for (long j = 0; j < dim; ++j) {
        // forward: L y = e_j (y_i = 0 for i < j)
        for (long i = 0; i < j; ++i) col[i] = 0.0;
        col[j] = 1.0;
        for (long i = j + 1; i < dim; ++i) col[i] = sd[i - 1] / u[i - 1] * col[i - 1];
        // backward: U x = y, U_{i,i+1} = -e_i
        col[dim - 1] /= u[dim - 1];
        for (long i = dim - 2; i >= 0; --i) col[i] = (col[i] + sd[i] * col[i + 1]) / u[i];
        for (long i = 0; i < dim; ++i) acc(i, j) += c * col[i];
      }
    }
    return acc;
  };

  const auto parts = parallel_map(xs.size(), threads, column_sum);
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& p : parts) S += p;
  Eigen::MatrixXcd FT = -(S + S.adjoint()) / kPi;
  Eigen::MatrixXcd F = Q * FT * Q.adjoint();
  return 0.5 * (F + F.adjoint());
}

inline Eigen::MatrixXcd matrix_function_hs(const Eigen::MatrixXd& A,
                                           const SmoothCompactFunction& f, int n,
                                           const QuadratureSpec& quad = {}, int threads = 1) {
  return matrix_function_hs(Eigen::MatrixXcd(A.cast<std::complex<double>>()), f, n, quad, threads);
}

/// Seeded Hermitian test matrix 1/2 + (G + G^*)/2 / (2 sqrt(dim/3)) with G
/// uniform on [-1, 1] + i[-1, 1]; its spectrum concentrates on [-1/2, 3/2].
inline Eigen::MatrixXcd random_hermitian(long dim, std::uint64_t seed, std::uint64_t index) {
  require(dim >= 1, "random_hermitian: dim must be >= 1");
  Eigen::MatrixXcd G(dim, dim);
  for (long i = 0; i < dim; ++i)
    for (long j = 0; j < dim; ++j) {
      const double re = 2 * detail::keyed_uniform(seed, 2 * index, {i, j}) - 1;
      const double im = 2 * detail::keyed_uniform(seed, 2 * index + 1, {i, j}) - 1;
      G(i, j) = {re, im};
    }
  const double scale = 1.0 / (2.0 * std::sqrt(static_cast<double>(dim) / 3.0));
  Eigen::MatrixXcd A = 0.5 * scale * (G + G.adjoint());
  A.diagonal().array() += 0.5;
  return A;
}

inline double operator_norm(const Eigen::MatrixXcd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

struct LemmaIntegralRow {
  long l = 0;
  double lhs = 0;
  double rhs = 0;
  bool holds = false;
};

struct LemmaIntegralReport {
  std::vector<LemmaIntegralRow> rows;
  long onset = -1;  ///< smallest listed l from which every larger listed l holds; -1 if none
  bool pass() const {
    for (const auto& r : rows)
      if (!r.holds) return false;
    return true;
  }
};

/// LHS(l) = \iint |dbar f~| |y|^{-2d-2} exp(-C3 |y| l) dx dy against
/// RHS(l) = 2 C3^{-n+2d+2} |||f|||_{n+1} |supp f| l^{-n+2d+1}.
inline LemmaIntegralReport lemma_integral_check(const SmoothCompactFunction& f, int n, int d,
                                                double c3, const std::vector<long>& ls,
                                                QuadratureSpec quad = {}) {
  require(d >= 1, "lemma_integral_check: dimension d must be >= 1");
  require(c3 > 0, "lemma_integral_check: C3 must be > 0");
  require(n >= 2 * d + 2, "lemma_integral_check: order n must be >= 2d + 2");
  require(f.lo() >= -0.5 && f.hi() <= 0.5, "lemma_integral_check: supp f must lie in [-1/2, 1/2]");
  for (long l : ls) require(l >= 1, "lemma_integral_check: l must be >= 1");
  quad.y_levels = std::max(quad.y_levels, 40);
  const AlmostAnalyticExtension ext(f, n);
  std::vector<double> xs, wx;
  detail::x_nodes(quad, f, xs, wx);
  const double norm = f.seminorm(n + 1);
  const double len = f.support_length();

  LemmaIntegralReport rep;
  for (long l : ls) {
    double lhs = 0;
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      const double bx = bracket(xs[ix]);
      std::vector<double> es, we;
      detail::eta_nodes(quad, 0.0, 2.0, es, we);
      for (std::size_t k = 0; k < es.size(); ++k) {
        const double y = bx * es[k];
        const double v = std::abs(ext.dbar(xs[ix], y));
        if (v == 0.0) continue;
        lhs += 2.0 * wx[ix] * we[k] * bx * v * std::pow(y, -2.0 * d - 2) *
               std::exp(-c3 * y * static_cast<double>(l));
      }
    }
    const double rhs = 2.0 * std::pow(c3, -n + 2.0 * d + 2) * norm * len *
                       std::pow(static_cast<double>(l), -n + 2.0 * d + 1);
    rep.rows.push_back({l, lhs, rhs, lhs <= rhs});
  }
  for (std::size_t i = rep.rows.size(); i-- > 0;) {
    if (!rep.rows[i].holds) break;
    rep.onset = rep.rows[i].l;
  }
  return rep;
}

}  // namespace rso
