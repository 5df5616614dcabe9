#pragma once

// Multi-scale analysis arithmetic: the length-scale, mass and probability
// exponent recursions, and the feasibility rule for the extension order n.

#include <cmath>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "rso/error.hpp"

namespace rso {

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<400>>;

struct MsaConstants {
  double c1 = 0, c2 = 0, c3 = 1, xi = 2;
  int d = 1;
};

struct MsaSchedule {
  double zeta = 1.5;
  MsaConstants constants;
  std::vector<BigInt> l;
  std::vector<double> m;
  std::vector<double> q;
  std::vector<double> log_l;  ///< natural log of l_j
  bool masses_positive = false;
  bool masses_decreasing = false;
  double limit_estimate = 0;  ///< m_J / m_0 times the remaining factors until they reach 1
  bool bounded_below = false;  ///< every m_j > 0 and limit_estimate > 0
};

/// [x]_3: greatest multiple of 3 not exceeding x >= 0.
inline BigInt floor_multiple_of_3(const BigFloat& x) {
  BigInt v = static_cast<BigInt>(boost::multiprecision::floor(x));
  return v - v % 3;
}

inline MsaSchedule msa_schedule(long l0, double m0, double q0, double zeta, int steps,
                                const MsaConstants& c = {}, double m0_constant = 0.0) {
  require(zeta > 1 && zeta < 2, "msa_schedule: zeta must lie in ]1, 2[");
  require(l0 >= 6 && l0 % 3 == 0, "msa_schedule: l0 must be a multiple of 3 and >= 6");
  require(steps >= 1, "msa_schedule: steps must be >= 1");
  require(m0 > 0 && m0 >= m0_constant * std::pow(static_cast<double>(l0), -0.25),
          "msa_schedule: m0 must be > 0 and >= const * l0^(-1/4)");
  require(c.d == 1 || c.d == 2, "msa_schedule: d must be 1 or 2");
  require(c.c3 > 0, "msa_schedule: c3 must be > 0");

  MsaSchedule s;
  s.zeta = zeta;
  s.constants = c;
  BigFloat m = m0, q = q0;
  const BigFloat Z = zeta;
  std::vector<BigFloat> lf{BigFloat(l0)};
  std::vector<BigFloat> ms{m};
  s.l.push_back(BigInt(l0));
  s.m.push_back(m0);
  s.q.push_back(q0);
  s.log_l.push_back(std::log(static_cast<double>(l0)));

  auto next_l = [&](const BigFloat& x) {
    const BigInt nx = floor_multiple_of_3(boost::multiprecision::pow(x, Z));
    if (nx <= static_cast<BigInt>(x)) throw ValidationError("msa_schedule: length scales stop increasing");
    return nx;
  };
  auto mass_factor = [](const BigFloat& a, const BigFloat& b) { return 1 - 4 * a / b; };

  for (int j = 0; j < steps; ++j) {
    const BigFloat lj = lf.back();
    const BigInt ln = next_l(lj);
    const BigFloat lnf = BigFloat(ln);
    if (boost::multiprecision::log10(lnf) > 300)
      throw ValidationError("msa_schedule: length scales exceed the arithmetic range");
    m = m * mass_factor(lj, lnf) - c.c1 / lj - c.c2 * boost::multiprecision::log(lnf) / lnf;
    const BigFloat inner = c.c3 * boost::multiprecision::pow(lnf / lj, 2 * c.d) *
                               boost::multiprecision::pow(lj, 2 * q) +
                           BigFloat(0.5) * boost::multiprecision::pow(lnf, -BigFloat(c.xi));
    q = boost::multiprecision::log(inner) / boost::multiprecision::log(lnf);
    lf.push_back(lnf);
    ms.push_back(m);
    s.l.push_back(ln);
    s.m.push_back(static_cast<double>(m));
    s.q.push_back(static_cast<double>(q));
    s.log_l.push_back(static_cast<double>(boost::multiprecision::log(lnf)));
  }

  s.masses_positive = true;
  s.masses_decreasing = true;
  for (std::size_t j = 0; j < ms.size(); ++j) {
    if (!(ms[j] > 0)) s.masses_positive = false;
    if (j > 0 && !(ms[j] < ms[j - 1])) s.masses_decreasing = false;
  }
  // Continue the homogeneous product until its factors are 1 to working precision.
  BigFloat tail = m / BigFloat(m0);
  BigFloat x = lf.back();
  for (int k = 0; k < 8 && boost::multiprecision::log10(x) * zeta < 300; ++k) {
    const BigFloat nx = BigFloat(next_l(x));
    const BigFloat f = mass_factor(x, nx);
    tail *= f;
    if (1 - f < BigFloat(1e-30)) break;
    x = nx;
  }
  s.limit_estimate = static_cast<double>(tail);
  s.bounded_below = s.masses_positive && s.limit_estimate > 0;
  return s;
}

struct FeasibleOrder {
  int n = 0;
  bool alpha_below_quarter = false;  ///< alpha in ]0, 1/4[
};

/// Smallest integer n with n (1 - alpha) > q + 3d + 1. Products within a
/// relative 1e-12 of the bound count as equal, so decimal inputs such as
/// alpha = 0.1 behave as their exact values.
inline FeasibleOrder alpha_n_feasible(double q, int d, double alpha) {
  require(alpha > 0 && alpha < 1, "alpha_n_feasible: alpha must lie in ]0, 1[");
  require(q > 0, "alpha_n_feasible: q must be > 0");
  require(d >= 1, "alpha_n_feasible: d must be >= 1");
  const double rhs = q + 3.0 * d + 1.0;
  const double tol = 1e-12 * rhs;
  auto ok = [&](long n) { return static_cast<double>(n) * (1.0 - alpha) > rhs + tol; };
  long n = static_cast<long>(std::floor(rhs / (1.0 - alpha))) + 1;
  while (n > 0 && ok(n - 1)) --n;
  while (!ok(n)) ++n;
  return FeasibleOrder{static_cast<int>(n), alpha < 0.25};
}

inline std::string to_string(const BigInt& v) { return v.str(); }

}  // namespace rso
