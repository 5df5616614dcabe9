// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <sstream>
#include <string>

#include "rso/bands.hpp"
#include "rso/hs_calculus.hpp"
#include "rso/ids.hpp"
#include "rso/msa.hpp"
#include "rso/probes.hpp"
#include "rso/runner.hpp"

#ifndef RSO_CONFIG_DIR
#define RSO_CONFIG_DIR "configs"
#endif

using namespace rso;
using runner::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

json resolved_config(const std::string& file, int threads = 1) {
  json raw = runner::load_config(fs::path(RSO_CONFIG_DIR) / file);
  raw["execution"]["threads"] = threads;
  const auto v = runner::validate(raw);
  if (!v.ok()) throw ValidationError(file + ": " + v.errors.front());
  return v.resolved;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
  return v;
}

// 1. HS calculus against the eigendecomposition.
Verdict hs_oracle() {
  const auto g = plateau_function(1.0, 4);
  const QuadratureSpec base;
  const QuadratureSpec fine = base.refined();
  double worst = 0, min_gain = 1e300;
  for (std::uint64_t k = 0; k < 25; ++k) {
    const auto A = random_hermitian(20, 5, k);
    const auto oracle = matrix_function_eig(A, g);
    const double e0 = operator_norm(matrix_function_hs(A, g, 4, base) - oracle);
    const double e1 = operator_norm(matrix_function_hs(A, g, 4, fine) - oracle);
    worst = std::max(worst, e0);
    min_gain = std::min(min_gain, e0 / e1);
  }
  return {worst <= 1e-6 && min_gain >= 4.0, "max error " + num(worst) + ", min refinement gain " + num(min_gain)};
}

// 2. dbar bound and near-axis identity.
Verdict dbar_bound() {
  long violations = 0;
  double worst_rel = 0;
  for (double E : {0.5, 0.05})
    for (int n : {2, 4}) {
      const auto f = plateau_function(E, n);
      const auto ext = extend(f, n);
      const auto rep = dbar_bound_check(ext, 200, 200);
      violations += rep.violations;
      // Same grid as the bound check, restricted to 0 < |y| <= 1.
      const double pad = 0.25 * f.support_length();
      const double xlo = f.lo() - pad, xhi = f.hi() + pad;
      const double R = std::max(std::abs(f.lo()), std::abs(f.hi()));
      const double ymax = 1.1 * (2 * R + 2);
      const double nfact = std::tgamma(n + 1.0);
      for (int i = 0; i < 200; ++i) {
        const double x = xlo + (xhi - xlo) * i / 199;
        for (int j = 0; j < 200; ++j) {
          const double y = -ymax + 2 * ymax * j / 199;
          if (y == 0.0 || std::abs(y) > 1.0) continue;
          const double lhs = std::abs(ext.dbar(x, y)) / std::pow(std::abs(y), n);
          const double ref = std::abs(f.deriv(n + 1, x)) / (2 * nfact);
          worst_rel = std::max(worst_rel, std::abs(lhs - ref) / std::max(1.0, ref));
        }
      }
    }
  return {violations == 0 && worst_rel <= 1e-8,
          std::to_string(violations) + " violations, near-axis mismatch " + num(worst_rel)};
}

// 3. Minimal-derivative scaling of the plateau.
Verdict plateau_scaling() {
  const int n = 4;
  double lo = 1e300, hi = 0;
  std::string d;
  for (double E : {1e-1, 1e-2, 1e-3}) {
    const double v = plateau_function(E, n).seminorm(n) * std::pow(E, n);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    d += (d.empty() ? "" : ", ") + num(v, 6);
  }
  const double spread = (hi - lo) / lo;
  return {spread < 0.01, "|||g_E|||_4 E^4 = " + d + " (spread " + num(spread) + ")"};
}

// 4. Free-model analytics.
Verdict free_model() {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(1, 1)), brillouin_zone(0, 1), 129, 1);
  double band_err = 0;
  for (std::size_t k = 0; k < b.thetas.size(); ++k)
    band_err = std::max(band_err, std::abs(b.at(k, 0) - (2 - 2 * std::cos(b.thetas[k][0]))));
  const long n = 200;
  const auto box = ids_dirichlet_box(assemble_h0(GridSpec{1, 1, n}, PeriodicPotential::zero(1, 1), Dirichlet{}), {2.0});
  const double box_err = std::abs(box.values[0] - 0.5);
  const auto model = AndersonModel::canonical(1, 1, 0.0, 0);
  const int res = 8;
  const auto E = linspace(0.0, 4.0, 801);
  double bz_err = 0;
  for (long l : {0, 4, 9}) {
    const auto c = ids_periodic_approx(model, DisorderSample::constant(SiteBox::symmetric(1, l), 0.0), l, E, res);
    for (std::size_t i = 0; i < E.size(); ++i) bz_err = std::max(bz_err, std::abs(c.values[i] - free_ids_1d(E[i])));
  }
  return {band_err <= 1e-10 && box_err <= 1.0 / n && bz_err <= 2.0 / res,
          "band error " + num(band_err) + ", |N(2) - 1/2| " + num(box_err) + ", Brillouin IDS sup-error " + num(bz_err)};
}

// 5. Regularity detector.
Verdict regularity() {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(2, 1)), brillouin_zone(0, 2), 33, 1);
  const auto rep = check_regularity(b, 0.0);
  double herr = 1e300;
  if (rep.minimizers.size() == 1) {
    Eigen::Matrix2d target = 2 * Eigen::Matrix2d::Identity();
    herr = (rep.minimizers[0].hessian - target).cwiseAbs().maxCoeff();
  }
  const auto q = BandStructure::from_function(brillouin_zone(0, 1), 65,
                                              [](Point th) { return std::vector<double>{std::pow(th[0], 4)}; }, true);
  const auto rq = check_regularity(q, 0.0);
  return {herr <= 1e-4 && rep.regular && !rq.regular,
          "free 2D Hessian error " + num(herr) + (rep.regular ? ", regular" : ", not regular") +
              (rq.regular ? "; quartic regular" : "; quartic non-regular")};
}

// 6. Box IDS equals dense counting.
Verdict ids_oracle() {
  long boxes = 0, mismatches = 0, ties = 0;
  auto check = [&](const AndersonModel& model, long cells, std::uint64_t r) {
    const GridSpec g = model.box(cells);
    if (g.size() > 400) return;
    const auto h = model.dirichlet_box(g, model.draw(model.coupling_sites(g), r));
    const auto ev = eigenvalues(h);
    const auto E = linspace(ev.front() - 0.5, ev.back() + 0.5, 257);
    const auto c = ids_dirichlet_box(h, E);
    const double tie = 1e-12 * std::max(1.0, std::max(std::abs(ev.front()), std::abs(ev.back())));
    for (std::size_t i = 0; i < E.size(); ++i) {
      // Energies within roundoff of an eigenvalue have no well-defined strict count.
      const auto it = std::lower_bound(ev.begin(), ev.end(), E[i] - tie);
      if (it != ev.end() && *it <= E[i] + tie) {
        ++ties;
        continue;
      }
      if (std::llround(c.values[i] * g.volume()) != count_sorted_below(ev, E[i])) ++mismatches;
    }
    ++boxes;
  };
  for (int p : {1, 2, 3, 4})
    for (long cells : {1L, 2L, 7L, 25L, 50L, 100L, 133L, 200L, 400L})
      check(AndersonModel::canonical(1, p, 2.0, 11), cells, static_cast<std::uint64_t>(cells));
  for (int p : {1, 2})
    for (long cells : {1L, 3L, 5L, 10L, 20L}) check(AndersonModel::canonical(2, p, 2.0, 12), cells, 0);
  return {mismatches == 0 && boxes > 0,
          std::to_string(boxes) + " boxes, " + std::to_string(mismatches) + " count mismatches, " +
              std::to_string(ties) + " roundoff ties skipped"};
}

// 7. Lifshitz exponent.
Verdict lifshitz() {
  const auto cfg = resolved_config("lifshitz.json");
  const long M = cfg["execution"]["samples"].get<long>();
  const long cells = cfg["experiment"]["cells"].get<long>();
  if (M < 500 || cells < 2000) return {false, "shipped config below M >= 500, box >= 2000"};
  const auto o = runner::run(cfg);
  const double k = o.summary["kappa"].get<double>();
  return {k >= -0.65 && k <= -0.35,
          "kappa = " + num(k) + " +- " + num(o.summary["kappa_half_width"].get<double>(), 2) + " (M " +
              std::to_string(M) + ", " + std::to_string(cells) + " sites)"};
}

// 8. Periodic-approximation difference trend.
Verdict ids_difference() {
  const auto cfg = resolved_config("ids-diff.json");
  const auto o = runner::run(cfg);
  const auto& rows = o.summary["rows"];
  bool trend = rows.size() >= 2;
  std::string d;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double delta = rows[i]["delta"].get<double>();
    d += (d.empty() ? "" : ", ") + std::string("l=") + std::to_string(rows[i]["l"].get<long>()) + ": " + num(delta, 3) +
         " (se " + num(rows[i]["delta_stderr"].get<double>(), 2) + ")";
    if (i > 0) {
      const double prev = rows[i - 1]["delta"].get<double>();
      const double floor = rows[i]["floor"].get<double>() + 2 * rows[i]["delta_stderr"].get<double>();
      trend = trend && (delta < prev || delta <= floor);
    }
  }
  const bool halved = rows.size() >= 2 && rows.back()["delta"].get<double>() <= 0.5 * rows.front()["delta"].get<double>();
  return {trend && halved, d};
}

// 9. Gap probability trend.
Verdict gap_probability_trend() {
  const auto cfg = resolved_config("gap-prob.json");
  const auto o = runner::run(cfg);
  const auto& rows = o.summary["rows"];
  if (rows.size() != 2) return {false, "expected l in {9, 27}"};
  const double a = rows[0]["estimate"].get<double>(), b = rows[1]["estimate"].get<double>();
  const bool ok = b < a || (a == 0.0 && b == 0.0);
  std::string d;
  for (const auto& r : rows)
    d += (d.empty() ? "" : ", ") + std::string("l=") + std::to_string(r["l"].get<long>()) + ": " +
         num(r["estimate"].get<double>()) + " [" + num(r["wilson"][0].get<double>(), 3) + ", " +
         num(r["wilson"][1].get<double>(), 3) + "]";
  return {ok, d};
}

// 10. Theta-averaged and fixed-theta inequalities.
Verdict theta_bounds() {
  const auto cfg = resolved_config("theta-bounds.json");
  const auto o = runner::run(cfg);
  auto holds = [](const json& r) {
    return r["lhs"].get<double>() <= r["rhs"].get<double>() + 2 * r["std_error"].get<double>();
  };
  const auto& a = o.summary["theta_average"];
  const auto& f = o.summary["fixed_theta"];
  return {holds(a) && holds(f), "theta-average " + num(a["lhs"].get<double>()) + " <= " + num(a["rhs"].get<double>()) +
                                    "; fixed-theta " + num(f["lhs"].get<double>()) + " <= " +
                                    num(f["rhs"].get<double>())};
}

// 11. Combes-Thomas decay of the free chain.
Verdict combes_thomas() {
  const auto h = assemble_h0(GridSpec{1, 1, 201}, PeriodicPotential::zero(1, 1), Dirichlet{});
  const auto p = combes_thomas_profile(h, {-1.0, 0.0}, {0, 0}, 30);
  const double target = -std::log((3 - std::sqrt(5.0)) / 2);
  const double rel = std::abs(p.rate / target - 1);
  return {rel <= 0.05 && p.r_squared > 0.99,
          "rate " + num(p.rate, 6) + " vs " + num(target, 6) + ", R^2 " + num(p.r_squared, 6)};
}

// 12. MSA arithmetic.
Verdict msa() {
  const auto s9 = msa_schedule(9, 1.0, -2.0, 1.5, 10);
  const bool scales = s9.l[1] == 27 && s9.l[2] == 138;
  // From l0 = 9 the first factor is 1 - 36/27 < 0; convergence is checked from l0 = 27.
  const auto s = msa_schedule(27, 1.0, -2.0, 1.5, 10);
  const bool mass = s.masses_positive && s.masses_decreasing && s.bounded_below && s.limit_estimate > 0;
  return {scales && mass, "l1 = " + to_string(s9.l[1]) + ", l2 = " + to_string(s9.l[2]) +
                              ", m1/m0 from 9 = " + num(s9.m[1], 6) + ", from 27: m_10/m_0 = " +
                              num(s.m.back(), 6) + ", limit >= " + num(s.limit_estimate, 6)};
}

// 13. Feasibility of the extension order.
Verdict feasibility() {
  const int n0 = alpha_n_feasible(2, 1, 0.25).n;
  long bad = 0, cases = 0;
  for (int q = 1; q <= 5; ++q)
    for (int d = 1; d <= 2; ++d)
      for (double a : {0.1, 0.2, 0.25}) {
        const int n = alpha_n_feasible(q, d, a).n;
        const double rhs = q + 3.0 * d + 1.0;
        const double tol = 1e-12 * rhs;
        ++cases;
        if (!(n * (1 - a) > rhs + tol) || (n - 1) * (1 - a) > rhs + tol) ++bad;
      }
  return {n0 == 9 && bad == 0, "n(2, 1, 1/4) = " + std::to_string(n0) + ", " + std::to_string(cases) +
                                   " cases, " + std::to_string(bad) + " not minimal"};
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name == "envelope.json") continue;  // carries wall time
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[name] = ss.str();
    if (name == "resolved_config.json") {  // thread count is echoed here by design
      auto cfg = json::parse(out[name]);
      cfg["execution"].erase("threads");
      out[name] = cfg.dump();
    }
  }
  return out;
}

// 14. Determinism across runs and thread counts.
Verdict determinism() {
  const fs::path out = fs::temp_directory_path() / "rso-acceptance-determinism";
  fs::remove_all(out);
  long configs = 0, differing = 0, failed = 0;
  std::string which;
  for (const auto& e : fs::directory_iterator(RSO_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ++configs;
    std::vector<std::map<std::string, std::string>> runs;
    std::vector<std::string> hashes;
    for (int threads : {1, 8, 8}) {
      json cfg = resolved_config(e.path().filename().string(), threads);
      cfg["execution"]["output"] = out.string();
      const auto r = runner::execute(cfg);
      if (r.exit_code == runner::kExitValidation || r.exit_code == runner::kExitNumerical) ++failed;
      hashes.push_back(r.payload_hash);
      runs.push_back(read_dir(r.directory));
    }
    bool same = true;
    for (std::size_t i = 1; i < runs.size(); ++i) same = same && runs[i] == runs[0] && hashes[i] == hashes[0];
    if (!same) {
      ++differing;
      which += " " + e.path().filename().string();
    }
  }
  fs::remove_all(out);
  return {configs > 0 && differing == 0 && failed == 0,
          std::to_string(configs) + " configs at threads 1, 8, 8; " + std::to_string(differing) + " differ" + which};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"HS calculus oracle", hs_oracle},
      {"dbar bound", dbar_bound},
      {"plateau derivative scaling", plateau_scaling},
      {"free-model analytics", free_model},
      {"regularity detector", regularity},
      {"IDS oracle equivalence", ids_oracle},
      {"Lifshitz exponent", lifshitz},
      {"periodic-approximation IDS trend", ids_difference},
      {"gap probability trend", gap_probability_trend},
      {"theta-averaged and fixed-theta bounds", theta_bounds},
      {"Combes-Thomas decay", combes_thomas},
      {"MSA arithmetic", msa},
      {"feasibility formula", feasibility},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::cout << "criterion " << (i + 1) << " " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << v.detail << " [" << num(secs, 3) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria pass" << std::endl;
  return failures == 0 ? 0 : 1;
}
