#pragma once

// Finite-difference Hamiltonians: H0 = -Laplacian + V0, the Anderson operator
// H0 + V_omega and the (2l+1)Z^d-periodic approximation H_{omega,l}.

#include <complex>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rso/disorder.hpp"
#include "rso/error.hpp"
#include "rso/grid.hpp"
#include "rso/potentials.hpp"

namespace rso {

using cplx = std::complex<double>;
using SparseC = Eigen::SparseMatrix<cplx>;

enum class Provenance { H0, Anderson, PeriodicApprox };

inline std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::H0: return "H0";
    case Provenance::Anderson: return "Anderson";
    case Provenance::PeriodicApprox: return "PeriodicApprox";
  }
  return "?";
}

/// Immutable Hermitian matrix on a grid, with its boundary condition and the
/// potential that sits on its diagonal.
class AssembledHamiltonian {
 public:
  AssembledHamiltonian(GridSpec grid, BoundaryCondition bc, Provenance kind, SparseC matrix,
                       std::vector<double> potential)
      : grid_(grid), bc_(bc), kind_(kind), m_(std::move(matrix)), pot_(std::move(potential)) {
    m_.makeCompressed();
  }

  const GridSpec& grid() const { return grid_; }
  const BoundaryCondition& bc() const { return bc_; }
  Provenance kind() const { return kind_; }
  const SparseC& matrix() const { return m_; }
  /// Total on-site potential V0 (+ V_omega) per grid point.
  const std::vector<double>& potential() const { return pot_; }
  Eigen::Index dim() const { return m_.rows(); }

  bool is_real(double tol = 0.0) const {
    for (int k = 0; k < m_.outerSize(); ++k)
      for (SparseC::InnerIterator it(m_, k); it; ++it)
        if (std::abs(it.value().imag()) > tol) return false;
    return true;
  }

  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(m_); }
  Eigen::MatrixXd dense_real() const {
    if (!is_real(1e-14)) throw ValidationError("AssembledHamiltonian: matrix is not real");
    return Eigen::MatrixXcd(m_).real();
  }

  /// max |A - A^*| entrywise.
  double hermiticity_defect() const {
    SparseC diff = SparseC(m_.adjoint()) - m_;
    double worst = 0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SparseC::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
  }

  /// Coordinate triples "row col re im", one nonzero per line.
  void write_triples(std::ostream& os) const {
    os.precision(17);
    os << "# rows=" << m_.rows() << " bc=" << bc_name(bc_) << " kind=" << provenance_name(kind_)
       << "\n";
    for (int k = 0; k < m_.outerSize(); ++k)
      for (SparseC::InnerIterator it(m_, k); it; ++it)
        os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' '
           << it.value().imag() << '\n';
  }

 private:
  GridSpec grid_;
  BoundaryCondition bc_;
  Provenance kind_;
  SparseC m_;
  std::vector<double> pot_;
};

namespace detail {

inline void check_mesh(const GridSpec& grid, int d, int p, const char* what) {
  if (d != grid.dimension || p != grid.points_per_cell)
    throw ValidationError(std::string(what) + ": mesh mismatch with grid (d, p)");
}

/// Stencil of -Laplacian plus a diagonal, with the boundary condition applied.
inline SparseC laplacian_plus_diagonal(const GridSpec& grid, const BoundaryCondition& bc,
                                       const std::vector<double>& diag) {
  const long n = grid.points_per_axis();
  const double hop = 1.0 / (grid.h() * grid.h());
  const bool wrap = !is_dirichlet(bc);
  const auto phase = wrap_phase(bc);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(grid.size() * (1 + 2 * grid.dimension));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto ij = grid.axis_indices(i);
    trip.emplace_back(i, i, cplx(2.0 * grid.dimension * hop + diag[i], 0.0));
    for (int ax = 0; ax < grid.dimension; ++ax) {
      for (int dir : {-1, +1}) {
        auto nb = ij;
        nb[ax] += dir;
        cplx amp(-hop, 0.0);
        if (nb[ax] < 0 || nb[ax] >= n) {
          if (!wrap) continue;
          // Leaving through the far face picks up exp(+i theta), the near face exp(-i theta).
          nb[ax] = (nb[ax] + n) % n;
          amp *= std::polar(1.0, dir * phase[ax]);
        }
        trip.emplace_back(i, grid.index(nb[0], nb[1]), amp);
      }
    }
  }
  SparseC m(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(grid.size()));
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

inline std::vector<double> tile_v0(const GridSpec& grid, const PeriodicPotential& v0) {
  const int p = grid.points_per_cell;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto ij = grid.axis_indices(i);
    v[i] = v0.at_cell_point(ij[0] % p, grid.dimension == 2 ? ij[1] % p : 0);
  }
  return v;
}

template <class SiteMap>
std::vector<double> anderson_diagonal(const GridSpec& grid, const SingleSitePotential& u,
                                      const DisorderSample& sample, SiteMap&& map_site) {
  const int p = grid.points_per_cell;
  const long r = u.reach();
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto ij = grid.axis_indices(i);
    const long kx = grid.site_of(ij[0]);
    const long ky = grid.dimension == 2 ? grid.site_of(ij[1]) : 0;
    const long mx = ij[0] % p;
    const long my = grid.dimension == 2 ? ij[1] % p : 0;
    const long ry = grid.dimension == 2 ? r : 0;
    double acc = 0;
    for (long dy = -ry; dy <= ry; ++dy)
      for (long dx = -r; dx <= r; ++dx) {
        const double uval = u.at(dx, mx, dy, my);
        if (uval == 0.0) continue;
        acc += sample.at(map_site(Site{kx - dx, ky - dy})) * uval;
      }
    v[i] = acc;
  }
  return v;
}

}  // namespace detail

/// Representative of k modulo n in the fundamental range of an n-cell box.
inline long fold_site(long k, long n) {
  const long off = n / 2;
  long r = (k + off) % n;
  if (r < 0) r += n;
  return r - off;
}

inline AssembledHamiltonian assemble_h0(const GridSpec& grid, const PeriodicPotential& v0,
                                        const BoundaryCondition& bc) {
  grid.validate();
  detail::check_mesh(grid, v0.dimension(), v0.points_per_cell(), "assemble_h0");
  validate_bc(bc, grid.dimension);
  auto v = detail::tile_v0(grid, v0);
  auto m = detail::laplacian_plus_diagonal(grid, bc, v);
  return AssembledHamiltonian(grid, bc, Provenance::H0, std::move(m), std::move(v));
}

/// sum_k omega_k u(x - k) on the box, with u truncated at its radius.
inline std::vector<double> anderson_potential(const GridSpec& grid, const SingleSitePotential& u,
                                              const DisorderSample& sample) {
  detail::check_mesh(grid, u.dimension(), u.points_per_cell(), "anderson_potential");
  return detail::anderson_diagonal(grid, u, sample, [](Site k) { return k; });
}

/// sum_k omega_{k mod n} u(x - k) on the n-cell torus.
inline std::vector<double> periodic_approx_potential(const GridSpec& grid,
                                                     const SingleSitePotential& u,
                                                     const DisorderSample& sample) {
  detail::check_mesh(grid, u.dimension(), u.points_per_cell(), "periodic_approx_potential");
  const long n = grid.cells;
  const bool two = grid.dimension == 2;
  return detail::anderson_diagonal(grid, u, sample, [n, two](Site k) {
    return Site{fold_site(k[0], n), two ? fold_site(k[1], n) : 0};
  });
}

inline AssembledHamiltonian assemble_anderson(const AssembledHamiltonian& h0,
                                              const SingleSitePotential& u,
                                              const DisorderSample& sample) {
  const auto& grid = h0.grid();
  auto dv = anderson_potential(grid, u, sample);
  SparseC m = h0.matrix();
  auto pot = h0.potential();
  for (std::size_t i = 0; i < dv.size(); ++i) {
    m.coeffRef(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += dv[i];
    pot[i] += dv[i];
  }
  return AssembledHamiltonian(grid, h0.bc(), Provenance::Anderson, std::move(m), std::move(pot));
}

inline AssembledHamiltonian assemble_periodic_approx(const GridSpec& grid,
                                                     const PeriodicPotential& v0,
                                                     const SingleSitePotential& u,
                                                     const DisorderSample& sample,
                                                     const BoundaryCondition& bc) {
  if (is_dirichlet(bc))
    throw ValidationError("assemble_periodic_approx: Dirichlet b.c. not allowed on the torus");
  grid.validate();
  detail::check_mesh(grid, v0.dimension(), v0.points_per_cell(), "assemble_periodic_approx");
  validate_bc(bc, grid.dimension);
  auto v = detail::tile_v0(grid, v0);
  auto dv = periodic_approx_potential(grid, u, sample);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += dv[i];
  auto m = detail::laplacian_plus_diagonal(grid, bc, v);
  return AssembledHamiltonian(grid, bc, Provenance::PeriodicApprox, std::move(m), std::move(v));
}

}  // namespace rso
