#pragma once

// An Anderson model H0 + V_omega: background V0, single-site bump u and the
// law of the couplings, with the boxes and periodic approximations built on it.

#include <cstdint>

#include "rso/disorder.hpp"
#include "rso/grid.hpp"
#include "rso/hamiltonian.hpp"
#include "rso/potentials.hpp"

namespace rso {

struct AndersonModel {
  PeriodicPotential v0;
  SingleSitePotential u;
  DisorderModel disorder;

  int dimension() const { return v0.dimension(); }
  int points_per_cell() const { return v0.points_per_cell(); }

  void validate() const {
    require(u.dimension() == v0.dimension() && u.points_per_cell() == v0.points_per_cell(),
            "AndersonModel: V0 and u live on different meshes");
    disorder.validate();
  }

  /// 1D/2D model with V0 = 0, u = indicator of the unit cell, omega ~ U[0, omega_max].
  static AndersonModel canonical(int d, int p, double omega_max, std::uint64_t seed) {
    DisorderModel law;
    law.omega_max = omega_max;
    law.seed = seed;
    return AndersonModel{PeriodicPotential::zero(d, p), SingleSitePotential::indicator(d, p, 1.0), law};
  }

  /// Sites whose bump reaches into the grid box.
  SiteBox coupling_sites(const GridSpec& grid) const {
    const long off = grid.site_offset();
    const long r = u.reach();
    SiteBox b;
    b.dimension = grid.dimension;
    b.lo = {-off - r, grid.dimension == 2 ? -off - r : 0};
    b.hi = {grid.cells - 1 - off + r, grid.dimension == 2 ? grid.cells - 1 - off + r : 0};
    return b;
  }

  GridSpec box(long cells) const { return GridSpec{dimension(), points_per_cell(), cells}; }

  DisorderSample draw(const SiteBox& sites, std::uint64_t realization) const {
    return sample_disorder(disorder, sites, realization);
  }

  /// H0 + V_omega restricted to the box with Dirichlet conditions.
  AssembledHamiltonian dirichlet_box(const GridSpec& grid, const DisorderSample& sample) const {
    return assemble_anderson(assemble_h0(grid, v0, Dirichlet{}), u, sample);
  }

  /// H_{omega,l}(theta) on the (2l+1)-cell torus, theta in B_l.
  AssembledHamiltonian periodic_approx(long l, const DisorderSample& sample, Point theta) const {
    const GridSpec grid = GridSpec::centered(dimension(), points_per_cell(), l);
    const double L = static_cast<double>(grid.cells);
    return assemble_periodic_approx(grid, v0, u, sample, Theta{{L * theta[0], L * theta[1]}});
  }
};

}  // namespace rso
