#pragma once

// i.i.d. coupling constants omega_k with counter-based seeding: every draw is
// a pure function of (master seed, realization index, site), so samples are
// reproducible and independent of evaluation order.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "rso/error.hpp"
#include "rso/grid.hpp"

namespace rso {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) keyed by (seed, realization, site).
inline double keyed_uniform(std::uint64_t seed, std::uint64_t realization, Site k) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ realization);
  h = splitmix64(h ^ static_cast<std::uint64_t>(k[0]));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(k[1]) * 0xd6e8feb86659fd93ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

enum class DisorderLaw { Uniform, Beta, Piecewise };

/// Law of omega_0: a bounded density supported on [0, omega_max].
struct DisorderModel {
  DisorderLaw law = DisorderLaw::Uniform;
  double omega_max = 1.0;
  std::uint64_t seed = 0;
  double beta_a = 1.0;  ///< Beta shape parameters (a, b >= 1 keeps the density bounded)
  double beta_b = 1.0;
  std::vector<double> bins;  ///< relative bin masses of a piecewise-constant density

  void validate() const {
    require(std::isfinite(omega_max) && omega_max >= 0.0, "DisorderModel: omega_max must be >= 0");
    if (law == DisorderLaw::Beta)
      require(beta_a >= 1.0 && beta_b >= 1.0, "DisorderModel: beta shapes must be >= 1");
    if (law == DisorderLaw::Piecewise) {
      require(!bins.empty(), "DisorderModel: piecewise law needs bins");
      double tot = 0;
      for (double b : bins) {
        require(b >= 0 && std::isfinite(b), "DisorderModel: bin masses must be >= 0");
        tot += b;
      }
      require(tot > 0, "DisorderModel: bin masses sum to zero");
    }
  }

  /// Quantile of the law at u in [0, 1).
  double quantile(double u) const {
    switch (law) {
      case DisorderLaw::Uniform:
        return omega_max * u;
      case DisorderLaw::Beta:
        return omega_max * boost::math::ibeta_inv(beta_a, beta_b, u);
      case DisorderLaw::Piecewise: {
        const double tot = std::accumulate(bins.begin(), bins.end(), 0.0);
        double target = u * tot;
        const double w = 1.0 / static_cast<double>(bins.size());
        for (std::size_t i = 0; i < bins.size(); ++i) {
          if (target < bins[i] || i + 1 == bins.size()) {
            const double frac = bins[i] > 0 ? std::min(target / bins[i], 1.0) : 0.0;
            return omega_max * w * (static_cast<double>(i) + frac);
          }
          target -= bins[i];
        }
        return omega_max;
      }
    }
    return 0.0;
  }

  double draw(std::uint64_t realization, Site k) const {
    return quantile(detail::keyed_uniform(seed, realization, k));
  }
};

/// Rectangular set of lattice sites [lo, hi] (inclusive) per axis.
struct SiteBox {
  int dimension = 1;
  Site lo{0, 0};
  Site hi{0, 0};

  static SiteBox symmetric(int d, long radius) {
    return SiteBox{d, {-radius, d == 2 ? -radius : 0}, {radius, d == 2 ? radius : 0}};
  }
  long extent(int axis) const { return hi[axis] - lo[axis] + 1; }
  std::size_t size() const {
    return static_cast<std::size_t>(extent(0)) * static_cast<std::size_t>(extent(1));
  }
  bool contains(Site k) const {
    return k[0] >= lo[0] && k[0] <= hi[0] && k[1] >= lo[1] && k[1] <= hi[1];
  }
  Site site(std::size_t i) const {
    const long w = extent(0);
    return {lo[0] + static_cast<long>(i) % w, lo[1] + static_cast<long>(i) / w};
  }
  std::size_t index(Site k) const {
    return static_cast<std::size_t>((k[0] - lo[0]) + extent(0) * (k[1] - lo[1]));
  }
};

/// Coupling constants on a box of sites.
class DisorderSample {
 public:
  DisorderSample() = default;
  DisorderSample(SiteBox sites, std::vector<double> values)
      : sites_(sites), values_(std::move(values)) {
    require(values_.size() == sites_.size(), "DisorderSample: value count mismatch");
  }

  /// The same coupling c on every site.
  static DisorderSample constant(SiteBox sites, double c) {
    return DisorderSample(sites, std::vector<double>(sites.size(), c));
  }

  const SiteBox& sites() const { return sites_; }
  const std::vector<double>& values() const { return values_; }
  bool covers(Site k) const { return sites_.contains(k); }

  double at(Site k) const {
    if (!sites_.contains(k))
      throw ValidationError("DisorderSample: missing coupling for site (" + std::to_string(k[0]) +
                            ", " + std::to_string(k[1]) + ")");
    return values_[sites_.index(k)];
  }

  double max() const {
    double m = 0;
    for (double v : values_) m = std::max(m, v);
    return m;
  }

 private:
  SiteBox sites_{};
  std::vector<double> values_{0.0};
};

inline DisorderSample sample_disorder(const DisorderModel& model, const SiteBox& sites,
                                      std::uint64_t realization) {
  model.validate();
  std::vector<double> v(sites.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = model.draw(realization, sites.site(i));
  return DisorderSample(sites, std::move(v));
}

}  // namespace rso
