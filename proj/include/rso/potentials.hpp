#pragma once

// Periodic background potential V0 and the single-site bump u of the
// Anderson perturbation, both sampled on the grid of a GridSpec.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rso/error.hpp"
#include "rso/grid.hpp"

namespace rso {

/// Z^d-periodic potential, stored as its samples on one unit cell
/// (index m_x + p * m_y).
class PeriodicPotential {
 public:
  PeriodicPotential() = default;
  PeriodicPotential(int dimension, int points_per_cell, std::vector<double> cell_samples)
      : d_(dimension), p_(points_per_cell), v_(std::move(cell_samples)) {
    require(d_ == 1 || d_ == 2, "PeriodicPotential: dimension must be 1 or 2");
    require(p_ >= 1, "PeriodicPotential: points_per_cell must be >= 1");
    require(v_.size() == cell_size(), "PeriodicPotential: sample count != p^d");
    for (double x : v_) require(std::isfinite(x), "PeriodicPotential: non-finite sample");
  }

  static PeriodicPotential zero(int d, int p) {
    return PeriodicPotential(d, p, std::vector<double>(d == 1 ? p : p * p, 0.0));
  }

  /// V0(x) = sum_j V_j(x_j) from one-dimensional cell profiles of length p.
  static PeriodicPotential decomposable(const std::vector<std::vector<double>>& profiles) {
    require(profiles.size() == 1 || profiles.size() == 2,
            "PeriodicPotential: need one profile per axis (d = 1 or 2)");
    const int d = static_cast<int>(profiles.size());
    const int p = static_cast<int>(profiles[0].size());
    for (const auto& prof : profiles)
      require(static_cast<int>(prof.size()) == p, "PeriodicPotential: profile lengths differ");
    std::vector<double> v(d == 1 ? p : p * p);
    if (d == 1) {
      v = profiles[0];
    } else {
      for (int my = 0; my < p; ++my)
        for (int mx = 0; mx < p; ++mx) v[mx + p * my] = profiles[0][mx] + profiles[1][my];
    }
    return PeriodicPotential(d, p, std::move(v));
  }

  /// Samples A cos(2 pi harmonic x) + offset at the intra-cell positions of mesh p.
  static std::vector<double> cosine_profile(int p, double amplitude, int harmonic = 1,
                                            double offset = 0.0) {
    std::vector<double> prof(p);
    const GridSpec g{1, p, 1};
    for (int m = 0; m < p; ++m)
      prof[m] = offset + amplitude * std::cos(2.0 * kPi * harmonic * g.intra_cell(m));
    return prof;
  }

  PeriodicPotential shifted(double c) const {
    auto v = v_;
    for (double& x : v) x += c;
    return PeriodicPotential(d_, p_, std::move(v));
  }

  int dimension() const { return d_; }
  int points_per_cell() const { return p_; }
  std::size_t cell_size() const { return d_ == 1 ? p_ : static_cast<std::size_t>(p_) * p_; }
  const std::vector<double>& samples() const { return v_; }

  double at_cell_point(long mx, long my = 0) const { return v_[mx + p_ * my]; }

 private:
  int d_ = 1;
  int p_ = 1;
  std::vector<double> v_{0.0};
};

/// Nonnegative single-site bump u, sampled at all grid offsets x - k within
/// the truncation radius R (sup-norm); beyond R it is dropped.
class SingleSitePotential {
 public:
  struct Params {
    double delta1 = 1.0;  ///< lower bound on the core cube
    double core = 1.0;    ///< side s of the core cube ||x||_inf < s/2
    double delta2 = 1.0;  ///< tail prefactor
    double delta3 = 1.0;  ///< tail rate
    double radius = 0.5;  ///< truncation radius R_u
  };

  SingleSitePotential() = default;

  /// Samples `profile` on the offsets of a (d, p) mesh.
  SingleSitePotential(int d, int p, Params params, const std::function<double(Point)>& profile)
      : d_(d), p_(p), par_(params) {
    require(d == 1 || d == 2, "SingleSitePotential: dimension must be 1 or 2");
    require(p >= 1, "SingleSitePotential: points_per_cell must be >= 1");
    require(par_.delta1 > 0 && par_.core > 0 && par_.delta2 > 0 && par_.delta3 > 0,
            "SingleSitePotential: delta1, core, delta2, delta3 must be > 0");
    require(par_.radius >= 0 && std::isfinite(par_.radius),
            "SingleSitePotential: truncation radius must be finite and >= 0");
    reach_ = static_cast<long>(std::ceil(par_.radius + 0.5));
    const long w = 2 * reach_ + 1;
    samples_.assign(static_cast<std::size_t>(d == 1 ? w * p : w * p * w * p), 0.0);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Point x = offset_of(i);
      if (sup_norm(x) <= par_.radius) samples_[i] = profile(x);
    }
  }

  /// u = delta1 on the core cube, zero elsewhere.
  static SingleSitePotential indicator(int d, int p, double delta1, double core = 1.0) {
    Params par{delta1, core, delta1, 1.0, 0.5 * core};
    const double half = 0.5 * core;
    return SingleSitePotential(d, p, par, [=](Point x) {
      return sup_norm_d(x, d) < half ? delta1 : 0.0;
    });
  }

  /// u(x) = amplitude * exp(-rate ||x||_inf). The truncation radius defaults to
  /// the smallest R with delta2 exp(-delta3 R) < 1e-10.
  static SingleSitePotential exponential(int d, int p, double amplitude, double rate,
                                         double delta1, double core, double delta2,
                                         double delta3, double radius = -1.0) {
    if (radius < 0) radius = default_radius(delta2, delta3);
    Params par{delta1, core, delta2, delta3, radius};
    return SingleSitePotential(d, p, par, [=](Point x) {
      return amplitude * std::exp(-rate * sup_norm_d(x, d));
    });
  }

  static double default_radius(double delta2, double delta3) {
    return std::max(0.5, std::log(delta2 * 1e10) / delta3 + 1e-9);
  }

  int dimension() const { return d_; }
  int points_per_cell() const { return p_; }
  const Params& params() const { return par_; }
  /// Cells of reach: u(x - k) can be nonzero only for ||cell(x) - k||_inf <= reach.
  long reach() const { return reach_; }
  const std::vector<double>& samples() const { return samples_; }

  /// u at offset (cell delta, intra-cell point m) for each axis.
  double at(long dcx, long mx, long dcy = 0, long my = 0) const {
    if (std::abs(dcx) > reach_ || std::abs(dcy) > reach_) return 0.0;
    const long w = (2 * reach_ + 1) * p_;
    const long ix = (dcx + reach_) * p_ + mx;
    const long iy = d_ == 1 ? 0 : (dcy + reach_) * p_ + my;
    return samples_[static_cast<std::size_t>(ix + w * iy)];
  }

  Point offset_of(std::size_t i) const {
    const long w = (2 * reach_ + 1) * p_;
    const long ix = static_cast<long>(i) % w;
    const long iy = static_cast<long>(i) / w;
    const GridSpec g{1, p_, 1};
    auto coord = [&](long a) { return static_cast<double>(a / p_ - reach_) + g.intra_cell(a % p_); };
    return {coord(ix), d_ == 2 ? coord(iy) : 0.0};
  }

  double sup_norm(Point x) const { return sup_norm_d(x, d_); }

 private:
  static double sup_norm_d(Point x, int d) {
    return d == 1 ? std::abs(x[0]) : std::max(std::abs(x[0]), std::abs(x[1]));
  }

  int d_ = 1;
  int p_ = 1;
  Params par_{};
  long reach_ = 1;
  std::vector<double> samples_;
};

struct SingleSiteReport {
  bool nonnegative = true;
  bool core_bound = true;
  bool tail_bound = true;
  std::vector<std::string> failures;
  bool pass() const { return nonnegative && core_bound && tail_bound; }
};

/// Pointwise scan of the sampled profile against the single-site hypotheses.
inline SingleSiteReport validate_single_site(const SingleSitePotential& u) {
  SingleSiteReport rep;
  const auto& par = u.params();
  const auto& s = u.samples();
  auto where = [&](Point x) {
    std::ostringstream os;
    os << "x=(" << x[0];
    if (u.dimension() == 2) os << ", " << x[1];
    os << ")";
    return os.str();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Point x = u.offset_of(i);
    const double r = u.sup_norm(x);
    if (s[i] < 0.0) {
      rep.nonnegative = false;
      rep.failures.push_back("negative sample u=" + std::to_string(s[i]) + " at " + where(x));
    }
    if (r < 0.5 * par.core) {
      if (s[i] < par.delta1) {
        rep.core_bound = false;
        rep.failures.push_back("core bound violated u=" + std::to_string(s[i]) + " < delta1 at " +
                               where(x));
      }
    } else {
      const double bound = par.delta2 * std::exp(-par.delta3 * r);
      if (std::abs(s[i]) > bound * (1.0 + 1e-12)) {
        rep.tail_bound = false;
        rep.failures.push_back("tail bound violated |u|=" + std::to_string(std::abs(s[i])) +
                               " > " + std::to_string(bound) + " at " + where(x));
      }
    }
  }
  return rep;
}

}  // namespace rso
