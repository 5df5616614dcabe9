#pragma once

// Integrated density of states: Dirichlet-box counting, Brillouin-zone
// integration for periodic approximations, disorder averages, smoothed
// functionals, Lifshitz fits and the periodic-approximation decay experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <tuple>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rso/bands.hpp"
#include "rso/error.hpp"
#include "rso/hamiltonian.hpp"
#include "rso/linalg.hpp"
#include "rso/model.hpp"
#include "rso/parallel.hpp"
#include "rso/smooth_function.hpp"

namespace rso {

/// Point mass of the spectral measure dN.
struct Atom {
  double energy;
  double weight;
};

/// N(E) on a sorted energy grid, counting strictly below E. When the atoms
/// of dN are known they are kept, so Stieltjes integrals are exact.
struct IdsCurve {
  std::vector<double> energies;
  std::vector<double> values;
  double volume = 1;      ///< |Lambda| (boxes) or (2l+1)^d (periodic approximations)
  int points_per_cell = 1;
  double total_mass = 0;  ///< N(+infinity)
  std::vector<Atom> atoms;

  bool monotone() const {
    for (std::size_t i = 1; i < values.size(); ++i)
      if (values[i] < values[i - 1]) return false;
    return true;
  }

  static IdsCurve from_atoms(std::vector<Atom> atoms, const std::vector<double>& energies,
                             double volume, int p) {
    IdsCurve c;
    c.energies = energies;
    c.volume = volume;
    c.points_per_cell = p;
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.energy < b.energy; });
    std::vector<double> cum(atoms.size() + 1, 0.0);
    for (std::size_t i = 0; i < atoms.size(); ++i) cum[i + 1] = cum[i] + atoms[i].weight;
    c.total_mass = cum.back();
    for (double E : energies) {
      const auto it = std::lower_bound(atoms.begin(), atoms.end(), E,
                                       [](const Atom& a, double e) { return a.energy < e; });
      c.values.push_back(cum[static_cast<std::size_t>(it - atoms.begin())]);
    }
    c.atoms = std::move(atoms);
    return c;
  }
};

namespace detail {
inline void check_energy_grid(const std::vector<double>& energies) {
  require(!energies.empty(), "IDS: energy grid is empty");
  for (std::size_t i = 1; i < energies.size(); ++i)
    require(energies[i] > energies[i - 1], "IDS: energy grid must be strictly increasing");
}
}  // namespace detail

/// N(E) = #{lambda < E} / |Lambda| on a Dirichlet box.
inline IdsCurve ids_dirichlet_box(const AssembledHamiltonian& h, const std::vector<double>& energies) {
  require(is_dirichlet(h.bc()), "ids_dirichlet_box: Dirichlet boundary condition required");
  detail::check_energy_grid(energies);
  IdsCurve c;
  c.energies = energies;
  c.volume = h.grid().volume();
  c.points_per_cell = h.grid().points_per_cell;
  c.total_mass = static_cast<double>(h.dim()) / c.volume;
  const EigenCounter counter(h);
  for (double E : energies) c.values.push_back(static_cast<double>(counter.below(E)) / c.volume);
  return c;
}

/// Same as ids_dirichlet_box, keeping the eigenvalues as atoms.
inline IdsCurve ids_dirichlet_box_atoms(const AssembledHamiltonian& h,
                                        const std::vector<double>& energies) {
  require(is_dirichlet(h.bc()), "ids_dirichlet_box: Dirichlet boundary condition required");
  detail::check_energy_grid(energies);
  const double vol = h.grid().volume();
  std::vector<Atom> atoms;
  for (double ev : eigenvalues(h)) atoms.push_back({ev, 1.0 / vol});
  return IdsCurve::from_atoms(std::move(atoms), energies, vol, h.grid().points_per_cell);
}

/// Midpoint lattice of `resolution` points per axis in B_l.
inline std::vector<Point> midpoint_thetas(const BrillouinZone& zone, int resolution) {
  require(resolution >= 1, "theta resolution must be >= 1");
  const double hw = zone.half_width();
  std::vector<Point> out;
  const int ny = zone.dimension == 2 ? resolution : 1;
  auto c = [&](int i) { return -hw + hw * (2.0 * i + 1.0) / resolution; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < resolution; ++i) out.push_back({c(i), zone.dimension == 2 ? c(j) : 0.0});
  return out;
}

/// N_{omega,l}(E) = (2 pi)^{-d} sum_n \int_{B_l} chi(E_n(theta) < E) dtheta by
/// the midpoint rule in theta.
inline IdsCurve ids_periodic_approx(const AndersonModel& model, const DisorderSample& sample,
                                    long l, const std::vector<double>& energies,
                                    int theta_resolution, int threads = 1) {
  require(l >= 0, "ids_periodic_approx: l must be >= 0");
  detail::check_energy_grid(energies);
  const auto zone = brillouin_zone(l, model.dimension());
  const auto thetas = midpoint_thetas(zone, theta_resolution);
  const double vol = std::pow(static_cast<double>(2 * l + 1), model.dimension());
  const double w = 1.0 / (static_cast<double>(thetas.size()) * vol);
  auto spectra = parallel_map(thetas.size(), threads, [&](std::size_t k) {
    return eigenvalues(model.periodic_approx(l, sample, thetas[k]));
  });
  std::vector<Atom> atoms;
  for (const auto& s : spectra)
    for (double ev : s) atoms.push_back({ev, w});
  return IdsCurve::from_atoms(std::move(atoms), energies, vol, model.points_per_cell());
}

/// Free IDS of -d^2/dx^2 on the unit-step lattice: arccos(1 - E/2) / pi on [0, 4].
inline double free_ids_1d(double E) {
  if (E <= 0) return 0.0;
  if (E >= 4) return 1.0;
  return std::acos(1.0 - 0.5 * E) / kPi;
}

struct DisorderAverage {
  std::vector<double> energies;
  std::vector<double> mean;
  std::vector<double> std_error;
  long samples = 0;
};

inline DisorderAverage average_ids(const std::vector<IdsCurve>& curves) {
  require(!curves.empty(), "average_ids: no curves");
  const auto& grid = curves.front().energies;
  for (const auto& c : curves) require(c.energies == grid, "average_ids: energy grids differ");
  const std::size_t m = curves.size();
  DisorderAverage a;
  a.energies = grid;
  a.samples = static_cast<long>(m);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0;
    for (const auto& c : curves) s += c.values[i];
    const double mu = s / static_cast<double>(m);
    double v = 0;
    for (const auto& c : curves) v += (c.values[i] - mu) * (c.values[i] - mu);
    a.mean.push_back(mu);
    a.std_error.push_back(m > 1 ? std::sqrt(v / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0);
  }
  return a;
}

/// \int g dN: exact over the atoms when present, otherwise a Stieltjes sum
/// over the grid increments with g at the cell midpoints.
inline double smoothed_functional(const SmoothCompactFunction& g, const IdsCurve& curve) {
  require(!curve.energies.empty(), "smoothed_functional: empty curve");
  require(g.lo() >= curve.energies.front() && g.hi() <= curve.energies.back(),
          "smoothed_functional: supp g escapes the energy grid");
  double s = 0;
  if (!curve.atoms.empty()) {
    for (const auto& a : curve.atoms) s += g(a.energy) * a.weight;
    return s;
  }
  for (std::size_t i = 0; i + 1 < curve.energies.size(); ++i)
    s += g(0.5 * (curve.energies[i] + curve.energies[i + 1])) * (curve.values[i + 1] - curve.values[i]);
  return s;
}

struct LifshitzFit {
  double kappa = 0;
  double intercept = 0;
  double half_width = 0;  ///< 2 standard errors of kappa
  double residual = 0;    ///< RMS residual
  double window_lo = 0, window_hi = 0;
  int points = 0;
  bool lifshitz = false;  ///< |kappa + d/2| <= 0.15
};

/// Least squares of log|log(N(E) - N(edge))| against log|E - edge| over the
/// grid energies above the edge whose mass lies in [window_lo, window_hi].
inline LifshitzFit lifshitz_fit(const std::vector<double>& energies, const std::vector<double>& mean,
                                double edge, int d, double window_lo = 1e-4, double window_hi = 1e-1) {
  require(energies.size() == mean.size(), "lifshitz_fit: size mismatch");
  require(window_lo > 0 && window_hi > window_lo && window_hi < 0.5,
          "lifshitz_fit: window must satisfy 0 < lo < hi < 1/2");
  double n_edge = 0;
  for (std::size_t i = 0; i < energies.size(); ++i)
    if (energies[i] <= edge) n_edge = mean[i];
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (energies[i] <= edge) continue;
    const double dn = mean[i] - n_edge;
    if (dn < window_lo || dn > window_hi) continue;
    xs.push_back(std::log(energies[i] - edge));
    ys.push_back(std::log(std::abs(std::log(dn))));
  }
  if (xs.size() < 4) throw ValidationError("lifshitz_fit: fewer than 4 usable points in the window");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  LifshitzFit f;
  f.kappa = sxy / sxx;
  f.intercept = my - f.kappa * mx;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - f.intercept - f.kappa * xs[i];
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  f.half_width = xs.size() > 2 ? 2.0 * std::sqrt(rss / (n - 2) / sxx) : 0.0;
  f.window_lo = window_lo;
  f.window_hi = window_hi;
  f.points = static_cast<int>(xs.size());
  f.lifshitz = std::abs(f.kappa + 0.5 * d) <= 0.15;
  return f;
}

inline LifshitzFit lifshitz_fit(const DisorderAverage& avg, double edge, int d,
                                double window_lo = 1e-4, double window_hi = 1e-1) {
  return lifshitz_fit(avg.energies, avg.mean, edge, d, window_lo, window_hi);
}

/// Disorder-averaged Dirichlet-box IDS of `cells` cells, realizations 0..M-1.
inline DisorderAverage box_ids_average(const AndersonModel& model, long cells,
                                       const std::vector<double>& energies, long M, int threads = 1) {
  require(M >= 1, "box_ids_average: M must be >= 1");
  model.validate();
  const GridSpec grid = model.box(cells);
  grid.validate();
  const SiteBox sites = model.coupling_sites(grid);
  auto curves = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    return ids_dirichlet_box(model.dirichlet_box(grid, model.draw(sites, m)), energies);
  });
  return average_ids(curves);
}

/// Log-spaced energies edge + [lo, hi].
inline std::vector<double> log_energies(double edge, double lo, double hi, int count) {
  require(lo > 0 && hi > lo && count >= 2, "log_energies: need 0 < lo < hi and count >= 2");
  std::vector<double> e;
  for (int i = 0; i < count; ++i)
    e.push_back(edge + lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return e;
}

struct IdsDifferenceRow {
  long l = 0;
  double functional = 0;  ///< mean over samples of \int g dN_{omega,l}
  double reference = 0;   ///< mean of the paired local reference on the same cells
  double delta = 0;       ///< |mean(\int g dN_{omega,l} - paired reference)|
  double delta_stderr = 0;
  double floor = 0;       ///< same difference at zero disorder
};

struct IdsDifferenceTable {
  long reference_l = 0;
  long samples = 0;
  double reference_local = 0;         ///< mean central-cell value of g(H) on the reference box
  double reference_local_stderr = 0;
  double reference_box = 0;           ///< mean whole-box Dirichlet \int g dN
  double reference_box_stderr = 0;
  std::vector<IdsDifferenceRow> rows;
};

namespace detail {

/// Diagonal of g(H) by a dense eigendecomposition.
inline Eigen::VectorXd function_diagonal(const AssembledHamiltonian& h, const SmoothCompactFunction& g) {
  Eigen::VectorXd ev;
  Eigen::MatrixXd w;  // |v_ki|^2
  if (h.is_real(1e-15)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense_real());
    if (es.info() != Eigen::Success) throw NumericalError("function_diagonal: solver failed");
    ev = es.eigenvalues();
    w = es.eigenvectors().cwiseAbs2();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense());
    if (es.info() != Eigen::Success) throw NumericalError("function_diagonal: solver failed");
    ev = es.eigenvalues();
    w = es.eigenvectors().cwiseAbs2();
  }
  Eigen::VectorXd gv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) gv[i] = g(ev[i]);
  return w * gv;
}

/// Per-cell average of sum_{k in cell} g(H)_kk over the cells with sup-norm
/// site index <= half_width: the functional per unit volume seen from the
/// middle of the box.
inline double cell_average(const GridSpec& grid, const Eigen::VectorXd& diag, long half_width) {
  const long p = grid.points_per_cell;
  const long off = grid.site_offset();
  const long ny = grid.dimension == 2 ? 2 * half_width + 1 : 1;
  double s = 0;
  for (long cy = 0; cy < ny; ++cy)
    for (long cx = 0; cx < 2 * half_width + 1; ++cx) {
      const long x0 = (off - half_width + cx) * p;
      const long y0 = grid.dimension == 2 ? (off - half_width + cy) * p : 0;
      for (long my = 0; my < (grid.dimension == 2 ? p : 1); ++my)
        for (long mx = 0; mx < p; ++mx) s += diag[static_cast<Eigen::Index>(grid.index(x0 + mx, y0 + my))];
    }
  return s / std::pow(static_cast<double>(2 * half_width + 1), grid.dimension);
}

/// Central-cell value sum_{k in cell 0} g(H)_kk.
inline double central_cell_functional(const AssembledHamiltonian& h, const SmoothCompactFunction& g) {
  return cell_average(h.grid(), function_diagonal(h, g), 0);
}

struct DifferenceSample {
  std::vector<double> periodic;  ///< \int g dN_{omega,l} per l
  std::vector<double> local;     ///< paired reference per l
  double central = 0;
  double box = 0;
};

inline DifferenceSample difference_sample(const AndersonModel& model, const SmoothCompactFunction& g,
                                          const std::vector<long>& ls, long reference_l,
                                          int theta_resolution, const DisorderSample& sample) {
  DifferenceSample out;
  const std::vector<double> span{g.lo() - 1.0, g.hi() + 1.0};
  for (long l : ls)
    out.periodic.push_back(smoothed_functional(g, ids_periodic_approx(model, sample, l, span, theta_resolution)));
  const GridSpec grid = GridSpec::centered(model.dimension(), model.points_per_cell(), reference_l);
  const auto h = model.dirichlet_box(grid, sample);
  const Eigen::VectorXd diag = function_diagonal(h, g);
  for (long l : ls) out.local.push_back(cell_average(grid, diag, l));
  out.central = cell_average(grid, diag, 0);
  out.box = diag.sum() / grid.volume();
  return out;
}

}  // namespace detail

/// Delta(l) = |E[\int g dN_{omega,l}] - \int g dN|. Each realization is drawn
/// once on the reference box of half-width reference_l. \int g dN is
/// estimated, per l, by the average of g(H_box)_kk over the 2l+1 central
/// cells, which carry the same couplings as the periodic approximation; the
/// paired difference has a far smaller variance than either term. The
/// central-cell value and the whole-box Dirichlet functional are reported too.
inline IdsDifferenceTable ids_difference_experiment(const AndersonModel& model,
                                                    const SmoothCompactFunction& g,
                                                    const std::vector<long>& ls, long M,
                                                    long reference_l, int theta_resolution = 8,
                                                    int threads = 1) {
  require(M >= 2, "ids_difference_experiment: M must be >= 2");
  require(!ls.empty(), "ids_difference_experiment: empty l list");
  for (long l : ls) require(l >= 1 && l <= reference_l, "ids_difference_experiment: need 1 <= l <= reference-l");
  model.validate();
  const GridSpec ref_grid = GridSpec::centered(model.dimension(), model.points_per_cell(), reference_l);
  ref_grid.validate();
  const SiteBox sites = model.coupling_sites(ref_grid);

  auto samples = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    return detail::difference_sample(model, g, ls, reference_l, theta_resolution, model.draw(sites, m));
  });
  const auto zero = detail::difference_sample(model, g, ls, reference_l, theta_resolution,
                                              DisorderSample::constant(sites, 0.0));

  auto mean_se = [M](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    const double mu = s / static_cast<double>(M);
    double q = 0;
    for (double x : v) q += (x - mu) * (x - mu);
    return std::pair<double, double>{mu, std::sqrt(q / static_cast<double>(M - 1) / static_cast<double>(M))};
  };

  IdsDifferenceTable t;
  t.reference_l = reference_l;
  t.samples = M;
  std::vector<double> loc, box;
  for (const auto& s : samples) {
    loc.push_back(s.central);
    box.push_back(s.box);
  }
  std::tie(t.reference_local, t.reference_local_stderr) = mean_se(loc);
  std::tie(t.reference_box, t.reference_box_stderr) = mean_se(box);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    std::vector<double> fun, ref, diff;
    for (const auto& s : samples) {
      fun.push_back(s.periodic[i]);
      ref.push_back(s.local[i]);
      diff.push_back(s.periodic[i] - s.local[i]);
    }
    IdsDifferenceRow r;
    r.l = ls[i];
    r.functional = mean_se(fun).first;
    r.reference = mean_se(ref).first;
    const auto [dm, dse] = mean_se(diff);
    r.delta = std::abs(dm);
    r.delta_stderr = dse;
    r.floor = std::abs(zero.periodic[i] - zero.local[i]);
    t.rows.push_back(r);
  }
  return t;
}

/// Delta decreases from each listed l to the next, except where the later
/// value is already within its noise floor (zero-disorder floor + 2 stderr).
inline bool decreasing_beyond_floor(const IdsDifferenceTable& t) {
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const auto& a = t.rows[i - 1];
    const auto& b = t.rows[i];
    if (!(b.delta < a.delta) && !(b.delta <= b.floor + 2 * b.delta_stderr)) return false;
  }
  return true;
}

inline void write_difference_csv(std::ostream& os, const IdsDifferenceTable& t) {
  os.precision(17);
  os << "l,functional,reference,delta,delta_stderr,floor\n";
  for (const auto& r : t.rows)
    os << r.l << ',' << r.functional << ',' << r.reference << ',' << r.delta << ',' << r.delta_stderr << ','
       << r.floor << '\n';
}

struct EdgeMass {
  long l = 0;
  double alpha = 0;
  double energy = 0;  ///< 2 l^{-alpha}
  double mean = 0;
  double std_error = 0;
  long samples = 0;
  double bound = 0;   ///< C7 l^{-n(1-alpha)+2d+1}
};

/// E[N_{omega,l}(2 l^{-alpha}) - N_{omega,l}(0)] for a lower band edge at 0.
inline EdgeMass band_edge_mass(const AndersonModel& model, long l, double alpha, long M,
                               int theta_resolution = 8, int n = 0, double c7 = 0.0,
                               int threads = 1) {
  require(l >= 2, "band_edge_mass: l must be >= 2");
  require(alpha > 0 && alpha < 1, "band_edge_mass: alpha must lie in ]0, 1[");
  require(M >= 1, "band_edge_mass: M must be >= 1");
  model.validate();
  EdgeMass out;
  out.l = l;
  out.alpha = alpha;
  out.energy = 2.0 * std::pow(static_cast<double>(l), -alpha);
  out.samples = M;
  const SiteBox sites = SiteBox::symmetric(model.dimension(), l);
  const std::vector<double> energies{0.0, out.energy};
  auto vals = parallel_map(static_cast<std::size_t>(M), threads, [&](std::size_t m) {
    const auto c = ids_periodic_approx(model, model.draw(sites, m), l, energies, theta_resolution);
    return c.values[1] - c.values[0];
  });
  double s = 0;
  for (double v : vals) s += v;
  out.mean = s / static_cast<double>(M);
  double q = 0;
  for (double v : vals) q += (v - out.mean) * (v - out.mean);
  out.std_error = M > 1 ? std::sqrt(q / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
  const int d = model.dimension();
  out.bound = c7 * std::pow(static_cast<double>(l), -n * (1 - alpha) + 2.0 * d + 1);
  return out;
}

inline void write_ids_csv(std::ostream& os, const DisorderAverage& a) {
  os.precision(17);
  os << "E,mean,stderr\n";
  for (std::size_t i = 0; i < a.energies.size(); ++i)
    os << a.energies[i] << ',' << a.mean[i] << ',' << a.std_error[i] << '\n';
}

}  // namespace rso
