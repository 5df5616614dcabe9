#pragma once

// Finite-difference grids over boxes of unit cells, and boundary conditions.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <variant>

#include "rso/error.hpp"

namespace rso {

inline constexpr double kPi = std::numbers::pi;

/// Lattice site / cell index. Unused trailing components are zero in d = 1.
using Site = std::array<long, 2>;
using Point = std::array<double, 2>;

/// Upper bound on grid points handled by the dense and banded solvers.
inline constexpr std::size_t kSolverBudget = 1u << 20;

/// Box of `cells` unit cells per axis, each sampled by `points_per_cell`
/// points per axis (mesh step h = 1/p). Cell c on an axis holds lattice site
/// k = c - cells/2 (integer division), so an odd box 2l+1 spans k in [-l, l].
struct GridSpec {
  int dimension = 1;
  int points_per_cell = 1;
  long cells = 1;

  /// The box Lambda_{2l+1} centred at the origin.
  static GridSpec centered(int d, int p, long half_width) {
    require(half_width >= 0, "GridSpec: half-width must be >= 0");
    return GridSpec{d, p, 2 * half_width + 1};
  }

  void validate() const {
    require(dimension == 1 || dimension == 2, "GridSpec: dimension must be 1 or 2");
    require(points_per_cell >= 1, "GridSpec: points_per_cell must be >= 1");
    require(cells >= 1, "GridSpec: cells must be >= 1");
    require(size() <= kSolverBudget, "GridSpec: point count exceeds the solver budget");
  }

  double h() const { return 1.0 / points_per_cell; }
  long points_per_axis() const { return cells * points_per_cell; }
  std::size_t size() const {
    std::size_t n = static_cast<std::size_t>(points_per_axis());
    return dimension == 1 ? n : n * n;
  }
  /// Continuum volume |Lambda| of the box.
  double volume() const { return std::pow(static_cast<double>(cells), dimension); }
  long site_offset() const { return cells / 2; }

  /// Flattened index of per-axis point indices.
  std::size_t index(long ix, long iy = 0) const {
    return static_cast<std::size_t>(ix + points_per_axis() * iy);
  }
  std::array<long, 2> axis_indices(std::size_t idx) const {
    const long n = points_per_axis();
    const long i = static_cast<long>(idx);
    return dimension == 1 ? std::array<long, 2>{i, 0} : std::array<long, 2>{i % n, i / n};
  }
  /// Position of sample m inside a cell, measured from the cell's lattice site.
  double intra_cell(long m) const { return (m + 0.5) * h() - 0.5; }
  /// Lattice site owning an axis point index.
  long site_of(long axis_point) const { return axis_point / points_per_cell - site_offset(); }
  /// Continuum coordinate of an axis point index.
  double coordinate(long axis_point) const {
    return static_cast<double>(site_of(axis_point)) + intra_cell(axis_point % points_per_cell);
  }
  Point position(std::size_t idx) const {
    auto ij = axis_indices(idx);
    return {coordinate(ij[0]), dimension == 2 ? coordinate(ij[1]) : 0.0};
  }
  /// Coordinate relative to the geometric centre of the box.
  double centered_coordinate(long axis_point) const {
    return (static_cast<double>(axis_point) + 0.5) * h() - 0.5 * static_cast<double>(cells);
  }
};

struct Dirichlet {};
struct Periodic {};
/// Quasi-periodic wrap: f(x + L e_j) = exp(i phase_j) f(x) across the box.
struct Theta {
  std::array<double, 2> phase{0.0, 0.0};
};

using BoundaryCondition = std::variant<Dirichlet, Periodic, Theta>;

inline bool is_dirichlet(const BoundaryCondition& bc) {
  return std::holds_alternative<Dirichlet>(bc);
}

/// Wrap phases of a non-Dirichlet condition; Periodic is phase zero.
inline std::array<double, 2> wrap_phase(const BoundaryCondition& bc) {
  if (auto t = std::get_if<Theta>(&bc)) return t->phase;
  return {0.0, 0.0};
}

inline void validate_bc(const BoundaryCondition& bc, int dimension) {
  if (auto t = std::get_if<Theta>(&bc)) {
    for (int j = 0; j < dimension; ++j)
      require(std::abs(t->phase[j]) <= kPi + 1e-12,
              "BoundaryCondition: theta component outside [-pi, pi]");
  }
}

inline std::string bc_name(const BoundaryCondition& bc) {
  if (std::holds_alternative<Dirichlet>(bc)) return "dirichlet";
  if (std::holds_alternative<Periodic>(bc)) return "periodic";
  return "theta";
}

}  // namespace rso
