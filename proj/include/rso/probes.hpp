#pragma once

// Localization probes: resolvent decay, gap probabilities, the theta-averaged
// and fixed-theta eigenvalue bounds, and m-regularity of boxes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "rso/bands.hpp"
#include "rso/error.hpp"
#include "rso/hamiltonian.hpp"
#include "rso/ids.hpp"
#include "rso/linalg.hpp"
#include "rso/model.hpp"
#include "rso/parallel.hpp"

namespace rso {

struct WilsonInterval {
  double lo = 0, hi = 1;
};

/// Wilson score interval for `hits` successes out of `n` (z = 1.96 by default).
inline WilsonInterval wilson_interval(long hits, long n, double z = 1.959963984540054) {
  require(n >= 1 && hits >= 0 && hits <= n, "wilson_interval: need 0 <= hits <= n, n >= 1");
  const double N = static_cast<double>(n);
  const double p = static_cast<double>(hits) / N;
  const double z2 = z * z;
  const double denom = 1 + z2 / N;
  const double centre = (p + z2 / (2 * N)) / denom;
  const double half = z / denom * std::sqrt(p * (1 - p) / N + z2 / (4 * N * N));
  const double lo = hits == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = hits == n ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

namespace detail {

inline std::vector<Eigen::Index> cell_points(const GridSpec& grid, Site cell) {
  const long p = grid.points_per_cell;
  const long off = grid.site_offset();
  std::vector<Eigen::Index> idx;
  const long ny = grid.dimension == 2 ? p : 1;
  for (long my = 0; my < ny; ++my)
    for (long mx = 0; mx < p; ++mx) {
      const long ix = (cell[0] + off) * p + mx;
      const long iy = grid.dimension == 2 ? (cell[1] + off) * p + my : 0;
      idx.push_back(static_cast<Eigen::Index>(grid.index(ix, iy)));
    }
  return idx;
}

inline double spectral_distance(const AssembledHamiltonian& h, std::complex<double> z) {
  double best = std::numeric_limits<double>::infinity();
  for (double ev : eigenvalues(h)) best = std::min(best, std::abs(z - ev));
  return best;
}

}  // namespace detail

struct DecayRow {
  long distance = 0;
  double norm = 0;
};

struct ResolventDecayProfile {
  std::complex<double> z;
  Site anchor{0, 0};
  double spectral_distance = 0;
  std::vector<DecayRow> rows;
  double rate = 0;       ///< fitted: norm ~ prefactor * exp(-rate * distance)
  double prefactor = 0;
  double r_squared = 0;
  double rate_per_distance = 0;  ///< rate / dist(z, spec)
};

/// ||chi_x (H - z)^{-1} chi_y|| for cells x at sup-distance 0..max_distance
/// from the anchor y (max over cells at equal distance), with a log-linear
/// fit over distances >= 1.
inline ResolventDecayProfile combes_thomas_profile(const AssembledHamiltonian& h,
                                                   std::complex<double> z, Site anchor,
                                                   long max_distance) {
  const auto& grid = h.grid();
  require(max_distance >= 2, "combes_thomas_profile: max_distance must be >= 2");
  const long lo = -grid.site_offset(), hi = grid.cells - 1 - grid.site_offset();
  auto in_box = [&](Site c) {
    return c[0] >= lo && c[0] <= hi && (grid.dimension == 1 || (c[1] >= lo && c[1] <= hi));
  };
  require(in_box(anchor), "combes_thomas_profile: anchor cell outside the box");
  ResolventDecayProfile prof;
  prof.z = z;
  prof.anchor = anchor;
  prof.spectral_distance = detail::spectral_distance(h, z);
  if (!(prof.spectral_distance > 1e-10))
    throw ValidationError("combes_thomas_profile: z lies on the spectrum");

  SparseC A = h.matrix();
  for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) -= z;
  Eigen::SparseLU<SparseC> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw NumericalError("combes_thomas_profile: factorization failed");
  const auto cols = detail::cell_points(grid, anchor);
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(A.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) rhs(cols[c], static_cast<Eigen::Index>(c)) = 1.0;
  const Eigen::MatrixXcd G = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw NumericalError("combes_thomas_profile: solve failed");

  std::vector<double> best(static_cast<std::size_t>(max_distance + 1), -1.0);
  const long ry = grid.dimension == 2 ? max_distance : 0;
  for (long dy = -ry; dy <= ry; ++dy)
    for (long dx = -max_distance; dx <= max_distance; ++dx) {
      const Site c{anchor[0] + dx, anchor[1] + dy};
      if (!in_box(c)) continue;
      const long dist = std::max(std::abs(dx), std::abs(dy));
      const auto rows = detail::cell_points(grid, c);
      Eigen::MatrixXcd block(static_cast<Eigen::Index>(rows.size()), G.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) block.row(static_cast<Eigen::Index>(r)) = G.row(rows[r]);
      const double nrm = Eigen::JacobiSVD<Eigen::MatrixXcd>(block).singularValues()[0];
      best[static_cast<std::size_t>(dist)] = std::max(best[static_cast<std::size_t>(dist)], nrm);
    }
  for (long k = 0; k <= max_distance; ++k)
    if (best[static_cast<std::size_t>(k)] > 0) prof.rows.push_back({k, best[static_cast<std::size_t>(k)]});

  std::vector<double> xs, ys;
  for (const auto& r : prof.rows)
    if (r.distance >= 1) {
      xs.push_back(static_cast<double>(r.distance));
      ys.push_back(std::log(r.norm));
    }
  if (xs.size() < 2) throw ValidationError("combes_thomas_profile: box too small for a decay fit");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  prof.rate = -slope;
  prof.prefactor = std::exp(my - slope * mx);
  prof.r_squared = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  prof.rate_per_distance = prof.rate / prof.spectral_distance;
  return prof;
}

/// Lowest edge of the first Floquet band of H0 on a full-zone grid.
inline double h0_band_bottom(const PeriodicPotential& v0, int resolution = 65) {
  const auto bands = compute_bands(h0_factory(v0), brillouin_zone(0, v0.dimension()), resolution, 1);
  return find_band_edges(bands).front().energy;
}

/// The model with V0 shifted so that the bottom of the spectrum of H0 is 0.
inline AndersonModel align_edge(const AndersonModel& model, int resolution = 65) {
  AndersonModel m = model;
  m.v0 = model.v0.shifted(-h0_band_bottom(model.v0, resolution));
  return m;
}

struct GapProbabilityEstimate {
  long l = 0;
  double alpha = 0;
  std::string bc;
  Point theta0{0.0, 0.0};
  long samples = 0;
  long hits = 0;
  double estimate = 0;
  WilsonInterval interval;
};

/// Fraction of samples with an eigenvalue in [0, l^{-alpha}[ on the l-cell
/// box with periodic (or theta0-phased) wrap, couplings folded onto the box.
inline GapProbabilityEstimate gap_probability(const AndersonModel& model, long l, double alpha,
                                              const BoundaryCondition& bc, long M, int threads = 1,
                                              double edge_tolerance = 1e-8) {
  require(l >= 1, "gap_probability: l must be >= 1");
  require(alpha > 0 && alpha < 1, "gap_probability: alpha must lie in ]0, 1[");
  require(M >= 1, "gap_probability: M must be >= 1");
  require(!is_dirichlet(bc), "gap_probability: boundary condition must be periodic or theta");
  model.validate();
  Point theta0{0.0, 0.0};
  if (auto t = std::get_if<Theta>(&bc)) {
    theta0 = {t->phase[0], t->phase[1]};
    require(brillouin_zone(l, model.dimension()).contains(theta0), "gap_probability: theta0 outside B_l");
  }
  const double edge = h0_band_bottom(model.v0);
  if (std::abs(edge) > edge_tolerance)
    throw ValidationError("gap_probability: lowest band edge of H0 is not at 0 (misaligned edge)");

  const GridSpec grid{model.dimension(), model.points_per_cell(), l};
  grid.validate();
  const double L = static_cast<double>(l);
  const BoundaryCondition wrap = std::holds_alternative<Theta>(bc)
                                     ? BoundaryCondition{Theta{{L * theta0[0], L * theta0[1]}}}
                                     : BoundaryCondition{Periodic{}};
  const long off = grid.site_offset();
  SiteBox sites;
  sites.dimension = model.dimension();
  sites.lo = {-off, model.dimension() == 2 ? -off : 0};
  sites.hi = {l - 1 - off, model.dimension() == 2 ? l - 1 - off : 0};
  const double window = std::pow(L, -alpha);

  auto hit = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const auto h = assemble_periodic_approx(grid, model.v0, model.u, model.draw(sites, m), wrap);
    const EigenCounter cnt(h);
    return cnt.below(window) - cnt.below(0.0) > 0 ? 1 : 0;
  });
  GapProbabilityEstimate est;
  est.l = l;
  est.alpha = alpha;
  est.bc = bc_name(bc);
  est.theta0 = theta0;
  est.samples = M;
  for (int x : hit) est.hits += x;
  est.estimate = static_cast<double>(est.hits) / static_cast<double>(M);
  est.interval = wilson_interval(est.hits, M);
  return est;
}

struct InequalityReport {
  double lhs = 0;
  double rhs = 0;
  double std_error = 0;  ///< standard error of the per-sample difference rhs - lhs
  double slack = 0;      ///< rhs + 2 std_error - lhs
  long samples = 0;
  bool pass = false;
  double c8 = 0, c9 = 0, xi = 0;
};

namespace detail {

inline InequalityReport finish(const std::vector<double>& lhs, const std::vector<double>& rhs) {
  const double M = static_cast<double>(lhs.size());
  InequalityReport r;
  r.samples = static_cast<long>(lhs.size());
  double md = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    r.lhs += lhs[i] / M;
    r.rhs += rhs[i] / M;
    md += (rhs[i] - lhs[i]) / M;
  }
  double q = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    const double dv = rhs[i] - lhs[i] - md;
    q += dv * dv;
  }
  r.std_error = lhs.size() > 1 ? std::sqrt(q / (M - 1) / M) : 0.0;
  r.slack = r.rhs + 2 * r.std_error - r.lhs;
  r.pass = r.slack >= 0;
  return r;
}

}  // namespace detail

/// LHS = \int_{B_l} P(sigma(H_{omega,l}(theta)) meets [0, E[) dtheta and
/// RHS = (2 pi)^d E[N_{omega,l}(E) - N_{omega,l}(0)], on one theta midpoint grid.
inline InequalityReport theta_average_check(const AndersonModel& model, long l, double E, long M,
                                            int theta_resolution = 8, int threads = 1) {
  require(E > 0, "theta_average_check: E must be > 0");
  require(l >= 1 && M >= 1, "theta_average_check: need l >= 1 and M >= 1");
  model.validate();
  const int d = model.dimension();
  const auto zone = brillouin_zone(l, d);
  const auto thetas = midpoint_thetas(zone, theta_resolution);
  const SiteBox sites = SiteBox::symmetric(d, l);
  const double two_pi_d = std::pow(2 * kPi, d);
  const double vol = std::pow(static_cast<double>(2 * l + 1), d);
  auto per = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const auto sample = model.draw(sites, m);
    double hits = 0, count = 0;
    for (const auto& th : thetas) {
      const EigenCounter cnt(model.periodic_approx(l, sample, th));
      const long c = cnt.below(E) - cnt.below(0.0);
      count += static_cast<double>(c);
      hits += c > 0 ? 1.0 : 0.0;
    }
    const double nth = static_cast<double>(thetas.size());
    return std::pair<double, double>{zone.volume() * hits / nth, two_pi_d * count / nth / vol};
  });
  std::vector<double> lhs, rhs;
  for (const auto& [a, b] : per) {
    lhs.push_back(a);
    rhs.push_back(b);
  }
  return detail::finish(lhs, rhs);
}

/// Lipschitz constant of the bands of H_{omega,l}(theta) in [lo, hi], max over
/// realizations 0..M-1 on an endpoint-inclusive grid.
inline double periodic_approx_lipschitz(const AndersonModel& model, long l, long M, int resolution,
                                        double lo, double hi, int threads = 1) {
  model.validate();
  const auto zone = brillouin_zone(l, model.dimension());
  const SiteBox sites = SiteBox::symmetric(model.dimension(), l);
  const long dim = static_cast<long>(GridSpec::centered(model.dimension(), model.points_per_cell(), l).size());
  auto xi = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const auto sample = model.draw(sites, m);
    HamiltonianFactory f = [&](Point th) { return model.periodic_approx(l, sample, th); };
    return estimate_lipschitz(compute_bands(f, zone, resolution, static_cast<int>(dim)), lo, hi);
  });
  return *std::max_element(xi.begin(), xi.end());
}

/// LHS = P(sigma(H_{omega,l}(theta0)) meets [0, E[) against
/// RHS = ((2 pi)^d / |B_l|) E[N_{omega,l}(E + C9/l) - N_{omega,l}(0)],
/// C9 = xi * C8 with diam_inf(B_l) = 2 pi / (2l+1) = C8 / l.
inline InequalityReport fixed_theta_check(const AndersonModel& model, long l, double E, Point theta0,
                                          long M, double xi, int theta_resolution = 8,
                                          int threads = 1) {
  require(E > 0 && E < 1, "fixed_theta_check: E must lie in ]0, 1[");
  require(l >= 1 && M >= 1, "fixed_theta_check: need l >= 1 and M >= 1");
  require(xi >= 0, "fixed_theta_check: Lipschitz constant must be >= 0");
  model.validate();
  const int d = model.dimension();
  const auto zone = brillouin_zone(l, d);
  require(zone.contains(theta0), "fixed_theta_check: theta0 outside B_l");
  const double L = static_cast<double>(l);
  const double c8 = 2 * kPi * L / static_cast<double>(2 * l + 1);
  const double c9 = xi * c8;
  const double E_hi = E + c9 / L;
  const auto thetas = midpoint_thetas(zone, theta_resolution);
  const SiteBox sites = SiteBox::symmetric(d, l);
  const double vol = std::pow(static_cast<double>(2 * l + 1), d);
  const double factor = std::pow(2 * kPi, d) / zone.volume();
  auto per = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const auto sample = model.draw(sites, m);
    const EigenCounter c0(model.periodic_approx(l, sample, theta0));
    const double hit = c0.below(E) - c0.below(0.0) > 0 ? 1.0 : 0.0;
    double count = 0;
    for (const auto& th : thetas) {
      const EigenCounter cnt(model.periodic_approx(l, sample, th));
      count += static_cast<double>(cnt.below(E_hi) - cnt.below(0.0));
    }
    return std::pair<double, double>{hit, factor * count / static_cast<double>(thetas.size()) / vol};
  });
  std::vector<double> lhs, rhs;
  for (const auto& [a, b] : per) {
    lhs.push_back(a);
    rhs.push_back(b);
  }
  auto rep = detail::finish(lhs, rhs);
  rep.c8 = c8;
  rep.c9 = c9;
  rep.xi = xi;
  return rep;
}

struct RegularityTestResult {
  long l = 0;           ///< box side in cells
  double delta = 0;
  double inner = 0;     ///< phi = 1 for ||x|| < inner
  double outer = 0;     ///< phi = 0 for ||x|| > outer
  double mass = 0;
  std::vector<double> eps;
  std::vector<double> norms;
  double sup = 0;
  double threshold = 0;  ///< exp(-m l)
  bool pass = false;
};

/// C^2 quintic ramp: 1 for r <= a, 0 for r >= b.
inline double ring_cutoff(double r, double a, double b) {
  if (r <= a) return 1.0;
  if (r >= b) return 0.0;
  const double u = (r - a) / (b - a);
  return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

/// max over eps of ||W(phi) (H - E - i eps)^{-1} chi|| on a Dirichlet box of
/// side l, where phi ramps between sup-radii l/2 - 2 delta and l/2 - delta
/// around the box centre and chi is the indicator of ||x|| <= l/6.
inline RegularityTestResult m_regularity_test(const AssembledHamiltonian& h, double E, double delta,
                                              double mass, const std::vector<double>& eps_probes = {
                                                                   1e-1, 1e-2, 1e-3, 1e-4}) {
  const auto& grid = h.grid();
  require(is_dirichlet(h.bc()), "m_regularity_test: Dirichlet box required");
  require(delta > 0, "m_regularity_test: delta must be > 0");
  require(!eps_probes.empty(), "m_regularity_test: empty eps-probe list");
  const double l = static_cast<double>(grid.cells);
  require(l >= 12 * delta, "m_regularity_test: box side must be >= 12 delta");
  for (double e : eps_probes) {
    require(e >= 0, "m_regularity_test: eps probes must be >= 0");
    if (e == 0.0 && detail::spectral_distance(h, E) < 1e-10)
      throw ValidationError("m_regularity_test: E lies on the spectrum with eps = 0");
  }
  RegularityTestResult res;
  res.l = grid.cells;
  res.delta = delta;
  res.inner = 0.5 * l - 2 * delta;
  res.outer = 0.5 * l - delta;
  res.mass = mass;
  res.threshold = std::exp(-mass * l);

  const auto n = static_cast<Eigen::Index>(grid.size());
  std::vector<double> phi(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> core;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ij = grid.axis_indices(static_cast<std::size_t>(i));
    double r = std::abs(grid.centered_coordinate(ij[0]));
    if (grid.dimension == 2) r = std::max(r, std::abs(grid.centered_coordinate(ij[1])));
    phi[static_cast<std::size_t>(i)] = ring_cutoff(r, res.inner, res.outer);
    if (r <= l / 6.0) core.push_back(i);
  }
  // W = [L, phi] with L the kinetic part of h.
  std::vector<Eigen::Triplet<cplx>> trip;
  const SparseC& H = h.matrix();
  for (int k = 0; k < H.outerSize(); ++k)
    for (SparseC::InnerIterator it(H, k); it; ++it) {
      if (it.row() == it.col()) continue;
      const double dphi = phi[static_cast<std::size_t>(it.col())] - phi[static_cast<std::size_t>(it.row())];
      if (dphi != 0.0) trip.emplace_back(it.row(), it.col(), it.value() * dphi);
    }
  SparseC W(n, n);
  W.setFromTriplets(trip.begin(), trip.end());
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(n, static_cast<Eigen::Index>(core.size()));
  for (std::size_t c = 0; c < core.size(); ++c) rhs(core[c], static_cast<Eigen::Index>(c)) = 1.0;
  for (double e : eps_probes) {
    SparseC A = H;
    for (Eigen::Index i = 0; i < n; ++i) A.coeffRef(i, i) -= cplx(E, e);
    Eigen::SparseLU<SparseC> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw NumericalError("m_regularity_test: factorization failed");
    const Eigen::MatrixXcd X = lu.solve(rhs);
    const Eigen::MatrixXcd WX = W * X;
    const double nrm = WX.size() ? Eigen::JacobiSVD<Eigen::MatrixXcd>(WX).singularValues()[0] : 0.0;
    res.eps.push_back(e);
    res.norms.push_back(nrm);
    res.sup = std::max(res.sup, nrm);
  }
  res.pass = res.sup <= res.threshold;
  return res;
}

struct RegularityRate {
  long samples = 0;
  long passes = 0;
  double rate = 0;
  WilsonInterval interval;
};

/// Pass fraction of m_regularity_test over realizations 0..M-1 of the
/// Dirichlet box of `cells` cells.
inline RegularityRate m_regularity_rate(const AndersonModel& model, long cells, double E, double delta,
                                        double mass, long M, const std::vector<double>& eps_probes,
                                        int threads = 1) {
  require(M >= 1, "m_regularity_rate: M must be >= 1");
  model.validate();
  const GridSpec grid = model.box(cells);
  const SiteBox sites = model.coupling_sites(grid);
  auto ok = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    return m_regularity_test(model.dirichlet_box(grid, model.draw(sites, m)), E, delta, mass, eps_probes).pass
               ? 1
               : 0;
  });
  RegularityRate r;
  r.samples = M;
  for (int x : ok) r.passes += x;
  r.rate = static_cast<double>(r.passes) / static_cast<double>(M);
  r.interval = wilson_interval(r.passes, M);
  return r;
}

inline void write_decay_csv(std::ostream& os, const ResolventDecayProfile& p) {
  os.precision(17);
  os << "distance,norm\n";
  for (const auto& r : p.rows) os << r.distance << ',' << r.norm << '\n';
}

}  // namespace rso
