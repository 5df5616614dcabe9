#pragma once

// Floquet band functions E_n(theta) over a Brillouin zone, band edges,
// regularity of band minima and the Lipschitz constant of the bands.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rso/error.hpp"
#include "rso/grid.hpp"
#include "rso/hamiltonian.hpp"
#include "rso/linalg.hpp"
#include "rso/parallel.hpp"

namespace rso {

/// B_l = [-pi/(2l+1), pi/(2l+1)]^d.
struct BrillouinZone {
  int dimension = 1;
  long l = 0;

  double half_width() const { return kPi / static_cast<double>(2 * l + 1); }
  double volume() const { return std::pow(2.0 * half_width(), dimension); }
  bool full() const { return l == 0; }
  bool contains(Point theta) const {
    for (int j = 0; j < dimension; ++j)
      if (std::abs(theta[j]) > half_width() * (1 + 1e-15)) return false;
    return true;
  }
};

inline BrillouinZone brillouin_zone(long l, int d) {
  require(l >= 0, "brillouin_zone: l must be >= 0");
  require(d == 1 || d == 2, "brillouin_zone: dimension must be 1 or 2");
  return BrillouinZone{d, l};
}

/// theta -> sorted lowest eigenvalues, for off-grid evaluation.
using BandEvaluator = std::function<std::vector<double>(Point)>;
/// theta -> Hamiltonian with Theta boundary condition on a fixed cell.
using HamiltonianFactory = std::function<AssembledHamiltonian(Point)>;

/// Sorted band values on the endpoint-inclusive lattice of `resolution`
/// points per axis spanning the zone (index i + resolution * j).
struct BandStructure {
  BrillouinZone zone;
  int resolution = 0;
  int num_bands = 0;
  std::vector<Point> thetas;
  std::vector<std::vector<double>> values;
  BandEvaluator evaluator;

  double step() const { return 2.0 * zone.half_width() / (resolution - 1); }
  std::size_t index(long i, long j = 0) const { return static_cast<std::size_t>(i + resolution * j); }
  double at(std::size_t k, int n) const { return values[k][static_cast<std::size_t>(n)]; }

  /// Grid of a BandStructure; evaluator values are not computed.
  static std::vector<Point> lattice(const BrillouinZone& zone, int resolution) {
    require(resolution >= 2, "BandStructure: resolution must be >= 2");
    const double hw = zone.half_width();
    auto coord = [&](long i) { return -hw + 2.0 * hw * static_cast<double>(i) / (resolution - 1); };
    std::vector<Point> out;
    const long ny = zone.dimension == 2 ? resolution : 1;
    for (long j = 0; j < ny; ++j)
      for (long i = 0; i < resolution; ++i)
        out.push_back({coord(i), zone.dimension == 2 ? coord(j) : 0.0});
    return out;
  }

  /// Band structure from an explicit band function (synthetic bands).
  static BandStructure from_function(const BrillouinZone& zone, int resolution,
                                     const BandEvaluator& fn, bool keep_evaluator = false) {
    BandStructure b;
    b.zone = zone;
    b.resolution = resolution;
    b.thetas = lattice(zone, resolution);
    for (const auto& th : b.thetas) {
      auto v = fn(th);
      std::sort(v.begin(), v.end());
      b.values.push_back(std::move(v));
    }
    b.num_bands = static_cast<int>(b.values.front().size());
    for (const auto& v : b.values)
      require(static_cast<int>(v.size()) == b.num_bands, "BandStructure: band count varies with theta");
    if (keep_evaluator) b.evaluator = fn;
    return b;
  }

  /// Largest |E_n| change between grid neighbours.
  double max_neighbor_jump() const {
    double m = 0;
    const long ny = zone.dimension == 2 ? resolution : 1;
    for (long j = 0; j < ny; ++j)
      for (long i = 0; i < resolution; ++i)
        for (int n = 0; n < num_bands; ++n) {
          if (i + 1 < resolution) m = std::max(m, std::abs(at(index(i + 1, j), n) - at(index(i, j), n)));
          if (j + 1 < ny) m = std::max(m, std::abs(at(index(i, j + 1), n) - at(index(i, j), n)));
        }
    return m;
  }
};

/// Lowest `num_bands` eigenvalues of factory(theta), sorted.
inline std::vector<double> lowest_eigenvalues(const HamiltonianFactory& factory, Point theta,
                                              int num_bands) {
  try {
    auto ev = eigenvalues(factory(theta));
    if (static_cast<long>(ev.size()) > num_bands) ev.resize(static_cast<std::size_t>(num_bands));
    return ev;
  } catch (const NumericalError& e) {
    std::ostringstream os;
    os << e.what() << " at theta = (" << theta[0] << ", " << theta[1] << ")";
    throw NumericalError(os.str());
  }
}

inline BandStructure compute_bands(const HamiltonianFactory& factory, const BrillouinZone& zone,
                                   int resolution, int num_bands, int threads = 1) {
  require(num_bands >= 1, "compute_bands: num_bands must be >= 1");
  BandStructure b;
  b.zone = zone;
  b.resolution = resolution;
  b.thetas = BandStructure::lattice(zone, resolution);
  b.values = parallel_map(b.thetas.size(), threads,
                          [&](std::size_t k) { return lowest_eigenvalues(factory, b.thetas[k], num_bands); });
  b.num_bands = static_cast<int>(b.values.front().size());
  b.evaluator = [factory, num_bands](Point th) { return lowest_eigenvalues(factory, th, num_bands); };
  return b;
}

/// theta -> H0 on one unit cell (l = 0) or on the (2l+1)-cell supercell with
/// wrap phase (2l+1) theta.
inline HamiltonianFactory h0_factory(const PeriodicPotential& v0, long l = 0) {
  const GridSpec grid = GridSpec::centered(v0.dimension(), v0.points_per_cell(), l);
  const double L = static_cast<double>(grid.cells);
  return [v0, grid, L](Point th) { return assemble_h0(grid, v0, Theta{{L * th[0], L * th[1]}}); };
}

enum class EdgeKind { Lower, Upper };

struct BandEdge {
  double energy = 0;
  EdgeKind kind = EdgeKind::Lower;
};

/// Edges of the union of band ranges; ranges closer than gap_tolerance merge.
inline std::vector<BandEdge> find_band_edges(const BandStructure& bands, double gap_tolerance = 0.0) {
  require(!bands.values.empty() && bands.num_bands > 0, "find_band_edges: empty band structure");
  std::vector<std::pair<double, double>> ranges;
  for (int n = 0; n < bands.num_bands; ++n) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < bands.values.size(); ++k) {
      lo = std::min(lo, bands.at(k, n));
      hi = std::max(hi, bands.at(k, n));
    }
    ranges.emplace_back(lo, hi);
  }
  std::sort(ranges.begin(), ranges.end());
  std::vector<BandEdge> edges;
  double lo = ranges[0].first, hi = ranges[0].second;
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first - hi > gap_tolerance) {
      edges.push_back({lo, EdgeKind::Lower});
      edges.push_back({hi, EdgeKind::Upper});
      lo = ranges[i].first;
    }
    hi = std::max(hi, ranges[i].second);
  }
  edges.push_back({lo, EdgeKind::Lower});
  edges.push_back({hi, EdgeKind::Upper});
  return edges;
}

struct EdgeMinimizer {
  int band = 0;
  Point theta{0.0, 0.0};
  Eigen::MatrixXd hessian;
  double min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  bool on_boundary = false;
};

struct BandEdgeReport {
  double edge = 0;
  std::vector<EdgeMinimizer> minimizers;
  std::vector<int> bands;  ///< index set of bands attaining the edge
  bool regular = false;
};

struct RegularityOptions {
  double fd_step = 1e-3;
  double pd_tolerance = 1e-6;
  double min_tolerance = 1e-9;
};

namespace detail {

/// Richardson-extrapolated central-difference Hessian of e(offset).
inline Eigen::MatrixXd fd_hessian(int d, const std::function<double(double, double)>& e, double h) {
  auto hess = [&](double s) {
    Eigen::MatrixXd H(d, d);
    const double e0 = e(0, 0);
    H(0, 0) = (e(s, 0) - 2 * e0 + e(-s, 0)) / (s * s);
    if (d == 2) {
      H(1, 1) = (e(0, s) - 2 * e0 + e(0, -s)) / (s * s);
      H(0, 1) = H(1, 0) = (e(s, s) - e(s, -s) - e(-s, s) + e(-s, -s)) / (4 * s * s);
    }
    return H;
  };
  return (4.0 * hess(0.5 * h) - hess(h)) / 3.0;
}

}  // namespace detail

/// Hessians of every band at every grid minimizer attaining `edge`. With an
/// evaluator the differences use fd_step off-grid; otherwise grid neighbours
/// (wrapping across a full zone) with the grid step.
inline BandEdgeReport check_regularity(const BandStructure& bands, double edge,
                                       const RegularityOptions& opt = {}) {
  require(!bands.values.empty(), "check_regularity: empty band structure");
  require(opt.fd_step > 0, "check_regularity: fd_step must be > 0");
  const int d = bands.zone.dimension;
  BandEdgeReport rep;
  rep.edge = edge;
  const double tol = opt.min_tolerance + 1e-12 * std::max(1.0, std::abs(edge));
  const long res = bands.resolution;
  const long ny = d == 2 ? res : 1;
  for (int n = 0; n < bands.num_bands; ++n) {
    bool attains = false;
    for (long j = 0; j < ny; ++j)
      for (long i = 0; i < res; ++i) {
        const std::size_t k = bands.index(i, j);
        if (std::abs(bands.at(k, n) - edge) > tol) continue;
        attains = true;
        EdgeMinimizer m;
        m.band = n;
        m.theta = bands.thetas[k];
        m.on_boundary = i == 0 || i == res - 1 || (d == 2 && (j == 0 || j == res - 1));
        if (bands.evaluator) {
          const Point th = m.theta;
          auto e = [&](double a, double b) {
            return bands.evaluator({th[0] + a, d == 2 ? th[1] + b : 0.0})[static_cast<std::size_t>(n)];
          };
          m.hessian = detail::fd_hessian(d, e, opt.fd_step);
        } else {
          const long period = res - 1;  // endpoints coincide on a full zone
          const bool wrap = bands.zone.full();
          bool ok = true;
          auto idx = [&](long a, long c) -> long {
            if (wrap) return ((a % period) + period) % period;
            if (a < 0 || a >= c) ok = false;
            return std::clamp(a, 0L, c - 1);
          };
          const double s = bands.step();
          auto e = [&](double a, double b) {
            const long ia = idx(i + std::lround(a / s), res);
            const long jb = d == 2 ? idx(j + std::lround(b / s), res) : 0;
            return bands.at(bands.index(ia, jb), n);
          };
          m.hessian = detail::fd_hessian(d, e, 2 * s);
          if (!ok) m.hessian.setConstant(std::numeric_limits<double>::quiet_NaN());
        }
        Eigen::MatrixXd sym = 0.5 * (m.hessian + m.hessian.transpose());
        m.hessian = sym;
        if (sym.allFinite())
          m.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues()[0];
        rep.minimizers.push_back(std::move(m));
      }
    if (attains) rep.bands.push_back(n);
  }
  rep.regular = !rep.minimizers.empty();
  for (const auto& m : rep.minimizers)
    if (!(m.min_eigenvalue > opt.pd_tolerance)) rep.regular = false;
  return rep;
}

/// max |Delta E_n| / |Delta theta| over grid neighbours with an endpoint
/// value in [lo, hi].
inline double estimate_lipschitz(const BandStructure& bands, double lo, double hi) {
  require(hi > lo, "estimate_lipschitz: empty energy window");
  const int d = bands.zone.dimension;
  const long res = bands.resolution;
  const long ny = d == 2 ? res : 1;
  const double s = bands.step();
  auto inside = [&](double e) { return e >= lo && e <= hi; };
  double xi = 0;
  for (long j = 0; j < ny; ++j)
    for (long i = 0; i < res; ++i)
      for (int n = 0; n < bands.num_bands; ++n) {
        const double e0 = bands.at(bands.index(i, j), n);
        auto visit = [&](std::size_t k2) {
          const double e1 = bands.at(k2, n);
          if (inside(e0) || inside(e1)) xi = std::max(xi, std::abs(e1 - e0) / s);
        };
        if (i + 1 < res) visit(bands.index(i + 1, j));
        if (d == 2 && j + 1 < ny) visit(bands.index(i, j + 1));
      }
  return xi;
}

/// CSV: theta1[,theta2],n,E
inline void write_bands_csv(std::ostream& os, const BandStructure& bands) {
  os.precision(17);
  os << (bands.zone.dimension == 2 ? "theta1,theta2,n,E\n" : "theta1,n,E\n");
  for (std::size_t k = 0; k < bands.thetas.size(); ++k)
    for (int n = 0; n < bands.num_bands; ++n) {
      os << bands.thetas[k][0] << ',';
      if (bands.zone.dimension == 2) os << bands.thetas[k][1] << ',';
      os << n + 1 << ',' << bands.at(k, n) << '\n';
    }
}

}  // namespace rso
