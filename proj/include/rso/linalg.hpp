#pragma once

// Spectra and eigenvalue counting for assembled Hamiltonians.
//
// Counting below E uses Sylvester's law of inertia on a banded LDL^* of
// H - E (no pivoting). A zero pivot is replaced by +pivmin, which moves the
// count toward "strictly below E": an eigenvalue exactly at E is not counted.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rso/error.hpp"
#include "rso/hamiltonian.hpp"

namespace rso {

/// All eigenvalues, ascending.
inline std::vector<double> eigenvalues(const AssembledHamiltonian& h) {
  Eigen::VectorXd ev;
  if (h.is_real(1e-15)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense_real(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalues: solver did not converge");
    ev = es.eigenvalues();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalues: solver did not converge");
    ev = es.eigenvalues();
  }
  return {ev.data(), ev.data() + ev.size()};
}

/// #{lambda in sorted eigenvalues : lambda < E}.
inline long count_sorted_below(const std::vector<double>& sorted, double E) {
  return static_cast<long>(std::lower_bound(sorted.begin(), sorted.end(), E) - sorted.begin());
}

/// Hermitian band matrix in lower-band storage: entry (i, j), i - b <= j <= i.
struct HermitianBand {
  long n = 0;
  long b = 0;
  std::vector<std::complex<double>> band;  // row-major, (b + 1) slots per row

  std::complex<double>& at(long i, long j) { return band[static_cast<std::size_t>(i * (b + 1) + (j - i + b))]; }
  std::complex<double> at(long i, long j) const {
    return band[static_cast<std::size_t>(i * (b + 1) + (j - i + b))];
  }
  double max_abs() const {
    double m = 0;
    for (auto z : band) m = std::max(m, std::abs(z));
    return m;
  }
};

/// Lower band of h if its bandwidth is at most `max_b`; otherwise n = 0.
inline HermitianBand to_band(const AssembledHamiltonian& h, long max_b) {
  const auto& m = h.matrix();
  long b = 0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseC::InnerIterator it(m, k); it; ++it) b = std::max<long>(b, std::abs(it.row() - it.col()));
  if (b > max_b) return {};
  HermitianBand hb{m.rows(), b, {}};
  hb.band.assign(static_cast<std::size_t>(hb.n * (b + 1)), {0.0, 0.0});
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseC::InnerIterator it(m, k); it; ++it)
      if (it.row() >= it.col()) hb.at(it.row(), it.col()) = it.value();
  return hb;
}

/// Number of eigenvalues of the band matrix strictly below E.
inline long inertia_count_below(const HermitianBand& a, double E) {
  const long n = a.n, b = a.b;
  const double scale = std::max(1.0, a.max_abs() + std::abs(E));
  const double pivmin = std::sqrt(std::numeric_limits<double>::min()) * scale;
  std::vector<std::complex<double>> L(static_cast<std::size_t>(n * (b + 1)));
  std::vector<double> D(static_cast<std::size_t>(n));
  auto Lat = [&](long i, long j) -> std::complex<double>& {
    return L[static_cast<std::size_t>(i * (b + 1) + (j - i + b))];
  };
  long neg = 0;
  for (long i = 0; i < n; ++i) {
    const long j0 = std::max(0L, i - b);
    for (long j = j0; j <= i; ++j) {
      std::complex<double> s = a.at(i, j);
      if (j == i) s -= E;
      const long k0 = std::max(j0, j - b);
      for (long k = k0; k < j; ++k) s -= Lat(i, k) * (std::conj(Lat(j, k)) * D[k]);  // grouped to avoid overflow
      if (j < i) {
        Lat(i, j) = s / D[j];
      } else {
        double d = s.real();
        if (std::abs(d) < pivmin) d = pivmin;
        D[i] = d;
        if (d < 0) ++neg;
      }
    }
  }
  return neg;
}

/// Eigenvalue counter for one Hamiltonian at many energies. Banded inertia is
/// used when the bandwidth is small; otherwise the spectrum is computed once.
class EigenCounter {
 public:
  explicit EigenCounter(const AssembledHamiltonian& h) {
    const long n = h.dim();
    const long limit = std::max<long>(1, static_cast<long>(std::sqrt(static_cast<double>(n))) + 1);
    band_ = to_band(h, limit);
    if (band_.n == 0) sorted_ = eigenvalues(h);
  }
  long below(double E) const {
    return band_.n > 0 ? inertia_count_below(band_, E) : count_sorted_below(sorted_, E);
  }
  bool uses_inertia() const { return band_.n > 0; }

 private:
  HermitianBand band_{};
  std::vector<double> sorted_;
};

inline long count_below(const AssembledHamiltonian& h, double E) { return EigenCounter(h).below(E); }

}  // namespace rso
