#pragma once

// Experiment runner: JSON config validation with exhaustive error lists, the
// resolved config (every default written out), dispatch to the experiments
// and the per-run output directory.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rso/bands.hpp"
#include "rso/error.hpp"
#include "rso/hs_calculus.hpp"
#include "rso/ids.hpp"
#include "rso/model.hpp"
#include "rso/msa.hpp"
#include "rso/parallel.hpp"
#include "rso/probes.hpp"
#include "rso/smooth_function.hpp"

namespace rso::runner {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitCheck = 4 };

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"bandstructure", "ids",          "lifshitz",     "ids-diff",
                                              "hs-check",      "ct-decay",     "gap-prob",     "theta-bounds",
                                              "msa-schedule",  "m-regularity"};
  return names;
}

// ---------------------------------------------------------------------------
// Schema helpers

struct Range {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = true;
  bool hi_open = true;

  bool contains(double x) const {
    if (std::isnan(x)) return false;
    const bool a = lo_open ? x > lo : x >= lo;
    const bool b = hi_open ? x < hi : x <= hi;
    return a && b;
  }
  std::string text() const {
    auto num = [](double v) {
      if (std::isinf(v)) return std::string(v < 0 ? "-inf" : "+inf");
      std::ostringstream os;
      os << v;
      return os.str();
    };
    return (lo_open ? "]" : "[") + num(lo) + "," + num(hi) + (hi_open ? "[" : "]");
  }
};

inline Range open_range(double a, double b) { return {a, b, true, true}; }
inline Range closed_range(double a, double b) { return {a, b, false, false}; }
inline Range at_least(double a) { return {a, std::numeric_limits<double>::infinity(), false, true}; }
inline Range above(double a) { return {a, std::numeric_limits<double>::infinity(), true, true}; }
inline Range any_real() { return {}; }

/// One JSON object of the config. Reads keys from `in`, writes the resolved
/// values to `out`, and appends "path.key: message" errors. Keys never read
/// are reported by finish().
class Section {
 public:
  Section(const json* in, json* out, std::string path, std::vector<std::string>* errors)
      : in_(in), out_(out), path_(std::move(path)), err_(errors) {
    if (!in_->is_object()) {
      fail_self("expected an object");
      valid_ = false;
    }
    if (!out_->is_object()) *out_ = json::object();
  }

  const std::string& path() const { return path_; }
  bool present(const std::string& key) const { return valid_ && in_->contains(key); }
  /// True when the key resolved without error.
  bool ok(const std::string& key) const { return !bad_.count(key); }
  bool all_ok() const { return bad_.empty(); }

  double number(const std::string& key, Range r, std::optional<double> def = {}) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : 0.0;
    if (!v->is_number()) return type_error(key, "a number"), 0.0;
    const double x = v->get<double>();
    if (!r.contains(x)) return range_error(key, x, r), x;
    return store(key, x);
  }

  long integer(const std::string& key, Range r, std::optional<long> def = {}) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : 0;
    if (!is_integral(*v)) return type_error(key, "an integer"), 0;
    const long x = v->get<long>();
    if (!r.contains(static_cast<double>(x))) return range_error(key, static_cast<double>(x), r), x;
    return store(key, x);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::optional<std::uint64_t> def = {}) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : 0;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      return type_error(key, "an unsigned 64-bit integer"), 0;
    return store(key, v->get<std::uint64_t>());
  }

  bool boolean(const std::string& key, std::optional<bool> def = {}) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : false;
    if (!v->is_boolean()) return type_error(key, "true or false"), false;
    return store(key, v->get<bool>());
  }

  std::string text(const std::string& key, std::optional<std::string> def = {}) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : std::string();
    if (!v->is_string() || v->get<std::string>().empty()) return type_error(key, "a non-empty string"), "";
    return store(key, v->get<std::string>());
  }

  std::string choice(const std::string& key, const std::vector<std::string>& options,
                     std::optional<std::string> def = {}) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : std::string();
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : "|") + o;
    if (!v->is_string()) return type_error(key, "one of " + list), "";
    const std::string s = v->get<std::string>();
    if (std::find(options.begin(), options.end(), s) == options.end()) {
      error(key, "'" + s + "' is not one of " + list);
      return s;
    }
    return store(key, s);
  }

  /// List of numbers, each in r; `exact` > 0 pins the length.
  std::vector<double> numbers(const std::string& key, Range r, std::optional<std::vector<double>> def = {},
                              std::size_t min_len = 1, std::size_t exact = 0) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : std::vector<double>{};
    std::vector<double> out;
    if (!v->is_array()) return type_error(key, "a list of numbers"), out;
    for (const auto& e : *v) {
      if (!e.is_number()) return type_error(key, "a list of numbers"), std::vector<double>{};
      out.push_back(e.get<double>());
    }
    if (!length_ok(key, out.size(), min_len, exact)) return out;
    for (double x : out)
      if (!r.contains(x)) return range_error(key, x, r), out;
    return store(key, out);
  }

  std::vector<long> integers(const std::string& key, Range r, std::optional<std::vector<long>> def = {},
                             std::size_t min_len = 1) {
    const json* v = fetch(key, def.has_value());
    if (!v) return def ? store(key, *def) : std::vector<long>{};
    std::vector<long> out;
    if (!v->is_array()) return type_error(key, "a list of integers"), out;
    for (const auto& e : *v) {
      if (!is_integral(e)) return type_error(key, "a list of integers"), std::vector<long>{};
      out.push_back(e.get<long>());
    }
    if (!length_ok(key, out.size(), min_len, 0)) return out;
    for (long x : out)
      if (!r.contains(static_cast<double>(x))) return range_error(key, static_cast<double>(x), r), out;
    return store(key, out);
  }

  /// Nested object. A missing optional child reads as {} so its defaults resolve.
  Section child(const std::string& key, bool required) {
    static const json empty = json::object();
    const json* v = fetch(key, !required);
    const json* src = v ? v : &empty;
    json& dst = (*out_)[key];
    Section s(src, &dst, path_ + "." + key, err_);
    if (!v && required) s.valid_ = false;
    if (!s.valid_) bad_.insert(key);
    return s;
  }

  /// Mark a key as read without resolving it (it is handled elsewhere).
  void skip(const std::string& key) { seen_.insert(key); }

  void error(const std::string& key, const std::string& message) {
    bad_.insert(key);
    err_->push_back(path_ + "." + key + ": " + message);
  }

  /// An error not tied to one of this section's keys.
  void note(const std::string& full_message) { err_->push_back(full_message); }

  /// Reports every key that no reader consumed.
  void finish() {
    if (!valid_) return;
    for (const auto& [k, v] : in_->items())
      if (!seen_.count(k)) err_->push_back(path_ + "." + k + ": unknown key");
  }

  bool valid() const { return valid_; }
  json& resolved() { return *out_; }

 private:
  const json* fetch(const std::string& key, bool optional) {
    seen_.insert(key);
    if (!valid_) {
      bad_.insert(key);
      return nullptr;
    }
    auto it = in_->find(key);
    if (it == in_->end() || it->is_null()) {
      if (!optional) error(key, "missing required field");
      return nullptr;
    }
    return &*it;
  }
  template <class T>
  T store(const std::string& key, T v) {
    (*out_)[key] = v;
    return v;
  }
  static bool is_integral(const json& v) {
    if (v.is_number_integer()) return true;
    if (v.is_number_float()) {
      const double x = v.get<double>();
      return std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15;
    }
    return false;
  }
  void type_error(const std::string& key, const std::string& what) { error(key, "expected " + what); }
  void range_error(const std::string& key, double x, const Range& r) {
    std::ostringstream os;
    os << x << " outside " << r.text();
    error(key, os.str());
  }
  bool length_ok(const std::string& key, std::size_t n, std::size_t min_len, std::size_t exact) {
    if (exact > 0 && n != exact) {
      error(key, "expected " + std::to_string(exact) + " entries, got " + std::to_string(n));
      return false;
    }
    if (n < min_len) {
      error(key, "expected at least " + std::to_string(min_len) + " entries");
      return false;
    }
    return true;
  }
  void fail_self(const std::string& message) { err_->push_back(path_ + ": " + message); }

  const json* in_;
  json* out_;
  std::string path_;
  std::vector<std::string>* err_;
  std::set<std::string> seen_;
  std::set<std::string> bad_;
  bool valid_ = true;
};

// ---------------------------------------------------------------------------
// Model block

/// Model built from a resolved model block. Also used by validation for the
/// consistency checks that need the assembled potentials.
inline AndersonModel build_model(const json& m, std::uint64_t seed) {
  const int d = m.at("dimension").get<int>();
  const int p = m.at("points_per_cell").get<int>();
  const json& v = m.at("v0");
  const std::string vt = v.at("type").get<std::string>();
  PeriodicPotential v0 = PeriodicPotential::zero(d, p);
  if (vt == "cosine") {
    const auto prof = PeriodicPotential::cosine_profile(p, v.at("amplitude").get<double>(),
                                                        v.at("harmonic").get<int>(), v.at("offset").get<double>());
    v0 = PeriodicPotential::decomposable(std::vector<std::vector<double>>(static_cast<std::size_t>(d), prof));
  } else if (vt == "samples") {
    v0 = PeriodicPotential(d, p, v.at("values").get<std::vector<double>>());
  }
  AndersonModel model;
  model.v0 = v0;
  if (m.contains("u")) {
    const json& u = m.at("u");
    if (u.at("type").get<std::string>() == "indicator")
      model.u = SingleSitePotential::indicator(d, p, u.at("delta1").get<double>(), u.at("core").get<double>());
    else
      model.u = SingleSitePotential::exponential(
          d, p, u.at("amplitude").get<double>(), u.at("rate").get<double>(), u.at("delta1").get<double>(),
          u.at("core").get<double>(), u.at("delta2").get<double>(), u.at("delta3").get<double>(),
          u.at("radius").get<double>());
  } else {
    model.u = SingleSitePotential::indicator(d, p, 1.0);
  }
  if (m.contains("disorder")) {
    const json& w = m.at("disorder");
    const std::string law = w.at("law").get<std::string>();
    model.disorder.law = law == "beta" ? DisorderLaw::Beta
                         : law == "piecewise" ? DisorderLaw::Piecewise
                                              : DisorderLaw::Uniform;
    model.disorder.omega_max = w.at("omega_max").get<double>();
    if (law == "beta") {
      model.disorder.beta_a = w.at("beta_a").get<double>();
      model.disorder.beta_b = w.at("beta_b").get<double>();
    }
    if (law == "piecewise") model.disorder.bins = w.at("bins").get<std::vector<double>>();
  }
  model.disorder.seed = seed;
  if (m.value("align_edge", false)) model = align_edge(model);
  return model;
}

enum class ModelNeed { None, Background, Full };

inline ModelNeed model_need(const std::string& experiment) {
  if (experiment == "msa-schedule" || experiment == "hs-check") return ModelNeed::None;
  if (experiment == "bandstructure") return ModelNeed::Background;
  return ModelNeed::Full;
}

inline void resolve_model(Section& m, ModelNeed need) {
  const long d = m.integer("dimension", closed_range(1, 2));
  const long p = m.integer("points_per_cell", closed_range(1, 64));
  const bool mesh_ok = m.ok("dimension") && m.ok("points_per_cell");

  Section v = m.child("v0", true);
  if (v.valid()) {
    const std::string t = v.choice("type", {"zero", "cosine", "samples"});
    if (t == "cosine") {
      v.number("amplitude", any_real());
      v.integer("harmonic", at_least(1), 1);
      v.number("offset", any_real(), 0.0);
    } else if (t == "samples") {
      const auto vals = v.numbers("values", any_real());
      if (mesh_ok && v.ok("values")) {
        const std::size_t want = static_cast<std::size_t>(d == 1 ? p : p * p);
        if (vals.size() != want)
          v.error("values", "expected points_per_cell^dimension = " + std::to_string(want) + " entries");
      }
    }
    v.finish();
  }

  const bool need_u = need == ModelNeed::Full || m.present("u");
  if (need_u) {
    Section u = m.child("u", need == ModelNeed::Full);
    if (u.valid()) {
      const std::string t = u.choice("type", {"indicator", "exponential"});
      if (t == "indicator") {
        u.number("delta1", above(0));
        u.number("core", open_range(0, 2), 1.0);
      } else if (t == "exponential") {
        u.number("amplitude", above(0));
        u.number("rate", at_least(0));
        u.number("delta1", above(0));
        u.number("core", above(0));
        const double d2 = u.number("delta2", above(0));
        const double d3 = u.number("delta3", above(0));
        if (u.ok("delta2") && u.ok("delta3"))
          u.number("radius", at_least(0), SingleSitePotential::default_radius(d2, d3));
        else
          u.skip("radius");
      }
      u.finish();
    }
  }

  const bool need_w = need == ModelNeed::Full || m.present("disorder");
  if (need_w) {
    Section w = m.child("disorder", need == ModelNeed::Full);
    if (w.valid()) {
      const std::string law = w.choice("law", {"uniform", "beta", "piecewise"});
      w.number("omega_max", at_least(0));
      if (law == "beta") {
        w.number("beta_a", at_least(1));
        w.number("beta_b", at_least(1));
      } else if (law == "piecewise") {
        const auto bins = w.numbers("bins", at_least(0));
        double tot = 0;
        for (double b : bins) tot += b;
        if (w.ok("bins") && !(tot > 0)) w.error("bins", "bin masses must have a positive total");
      }
      w.finish();
    }
  }
  m.boolean("align_edge", false);
  m.finish();
}

// ---------------------------------------------------------------------------
// Experiment blocks

struct ModelFacts {
  bool ok = false;  ///< the model block resolved and could be built
  int dimension = 1;
  int points_per_cell = 1;
  double band_bottom = 0;  ///< lowest band edge of the (aligned) background
};

inline void cross_grid(Section& s, const std::string& key, const ModelFacts& mf, long cells) {
  if (!mf.ok || !s.ok(key)) return;
  const GridSpec g{mf.dimension, mf.points_per_cell, cells};
  if (g.size() > kSolverBudget) s.error(key, "box exceeds the solver budget of " + std::to_string(kSolverBudget) + " points");
}

inline void resolve_experiment(Section& e, const std::string& name, const ModelFacts& mf) {
  const Range positive_int = at_least(1);
  if (name == "bandstructure") {
    e.integer("l", at_least(0), 0);
    e.integer("resolution", closed_range(3, 4097), 33);
    e.integer("bands", positive_int, 4);
    e.number("gap_tolerance", at_least(0), 1e-9);
    e.number("fd_step", open_range(0, 1), 1e-3);
  } else if (name == "ids") {
    const std::string method = e.choice("method", {"dirichlet", "periodic"}, "dirichlet");
    if (method == "periodic") {
      const long l = e.integer("l", at_least(0), 4);
      e.integer("theta_resolution", positive_int, 8);
      cross_grid(e, "l", mf, 2 * l + 1);
    } else {
      const long c = e.integer("cells", positive_int, 200);
      cross_grid(e, "cells", mf, c);
    }
    const double lo = e.number("energy_min", any_real(), mf.band_bottom);
    const double hi = e.number("energy_max", any_real(), mf.band_bottom + 4.0);
    e.integer("energy_count", closed_range(2, 1e6), 81);
    if (e.ok("energy_min") && e.ok("energy_max") && !(hi > lo)) e.error("energy_max", "must exceed energy_min");
  } else if (name == "lifshitz") {
    const long c = e.integer("cells", positive_int, 2000);
    cross_grid(e, "cells", mf, c);
    e.number("edge", any_real(), mf.band_bottom);
    const double lo = e.number("energy_lo", above(0), 1e-3);
    const double hi = e.number("energy_hi", above(0), 2.0);
    if (e.ok("energy_lo") && e.ok("energy_hi") && !(hi > lo)) e.error("energy_hi", "must exceed energy_lo");
    e.integer("energy_count", closed_range(2, 1e6), 80);
    const double wlo = e.number("window_lo", open_range(0, 0.5), 1e-4);
    const double whi = e.number("window_hi", open_range(0, 0.5), 1e-1);
    if (e.ok("window_lo") && e.ok("window_hi") && !(whi > wlo)) e.error("window_hi", "must exceed window_lo");
  } else if (name == "ids-diff") {
    e.number("plateau_energy", above(0), 1.0);
    e.integer("plateau_order", closed_range(1, 20), 4);
    const auto ls = e.integers("l", positive_int, std::vector<long>{4, 8, 16});
    const bool ls_ok = e.ok("l");
    if (ls_ok)
      for (std::size_t i = 1; i < ls.size(); ++i)
        if (ls[i] <= ls[i - 1]) {
          e.error("l", "values must be strictly increasing");
          break;
        }
    const long lmax = ls_ok && !ls.empty() ? ls.back() : 1;
    const long ref = e.integer("reference_l", positive_int, 4 * lmax);
    if (ls_ok && e.ok("reference_l") && ref < lmax) e.error("reference_l", "must be >= the largest l");
    cross_grid(e, "reference_l", mf, 2 * ref + 1);
    e.integer("theta_resolution", positive_int, 8);
  } else if (name == "hs-check") {
    e.number("plateau_energy", above(0), 1.0);
    const long n = e.integer("plateau_order", closed_range(1, 20), 4);
    e.integer("dimension", closed_range(1, 400), 20);
    e.integer("matrices", positive_int, 25);
    e.number("tolerance", above(0), 1e-6);
    e.number("min_refinement_gain", at_least(1), 4.0);
    e.integer("dbar_grid", closed_range(2, 4000), 200);
    Section q = e.child("quadrature", false);
    const std::string scheme = q.choice("scheme", {"gauss", "midpoint"}, "gauss");
    (void)scheme;
    q.integer("x_panels", positive_int, 4);
    q.integer("y_levels", positive_int, 16);
    q.number("y_ratio", open_range(0, 1), 0.5);
    q.integer("y_outer_panels", positive_int, 1);
    const double eps = q.number("eps_y", at_least(0), 0.0);
    if (e.ok("plateau_order") && q.ok("eps_y") && n < 2 && !(eps > 0))
      q.error("eps_y", "must be > 0 when plateau_order < 2");
    q.finish();
  } else if (name == "ct-decay") {
    const long c = e.integer("cells", at_least(5), 201);
    cross_grid(e, "cells", mf, c);
    e.number("z_re", any_real(), -1.0);
    e.number("z_im", any_real(), 0.0);
    const long a = e.integer("anchor", any_real(), 0);
    const long md = e.integer("max_distance", at_least(2), 30);
    if (e.ok("cells") && e.ok("anchor") && (a < -c / 2 || a > c - 1 - c / 2))
      e.error("anchor", "cell index outside the box");
    if (e.ok("cells") && e.ok("max_distance") && md > c - 1) e.error("max_distance", "must be < cells");
    e.boolean("with_disorder", false);
  } else if (name == "gap-prob") {
    const auto ls = e.integers("l", positive_int, std::vector<long>{9, 27});
    if (e.ok("l"))
      for (long l : ls) cross_grid(e, "l", mf, l);
    e.number("alpha", open_range(0, 1), 0.25);
    const std::string bc = e.choice("bc", {"periodic", "theta"}, "periodic");
    if (bc == "theta") {
      const std::size_t d = static_cast<std::size_t>(mf.ok ? mf.dimension : 1);
      const auto th = e.numbers("theta0", closed_range(-kPi, kPi), std::vector<double>(d, 0.0), 1, mf.ok ? d : 0);
      if (e.ok("theta0") && e.ok("l"))
        for (long l : ls)
          if (!brillouin_zone(l, static_cast<int>(d)).contains({th[0], d == 2 ? th[1] : 0.0})) {
            e.error("theta0", "outside B_l for l = " + std::to_string(l));
            break;
          }
    }
    if (mf.ok && std::abs(mf.band_bottom) > 1e-8)
      e.note("model.align_edge: gap-prob needs the lowest band edge at 0; set align_edge = true");
  } else if (name == "theta-bounds") {
    const long l = e.integer("l", positive_int, 9);
    cross_grid(e, "l", mf, 2 * l + 1);
    e.number("energy_average", above(0), 0.5);
    e.number("energy_fixed", open_range(0, 1), 0.5);
    const std::size_t d = static_cast<std::size_t>(mf.ok ? mf.dimension : 1);
    const auto th = e.numbers("theta0", closed_range(-kPi, kPi), std::vector<double>(d, 0.0), 1, mf.ok ? d : 0);
    if (e.ok("l") && e.ok("theta0") && !brillouin_zone(l, static_cast<int>(d)).contains({th[0], d == 2 ? th[1] : 0.0}))
      e.error("theta0", "outside B_l");
    e.integer("theta_resolution", positive_int, 8);
    e.integer("lipschitz_resolution", at_least(2), 9);
    const auto win = e.numbers("lipschitz_window", any_real(), std::vector<double>{0.0, 2.0}, 2, 2);
    if (e.ok("lipschitz_window") && !(win[1] > win[0])) e.error("lipschitz_window", "needs lo < hi");
    if (mf.ok && std::abs(mf.band_bottom) > 1e-8)
      e.note("model.align_edge: theta-bounds needs the lowest band edge at 0; set align_edge = true");
  } else if (name == "msa-schedule") {
    const long l0 = e.integer("l0", at_least(6), 27);
    if (e.ok("l0") && l0 % 3 != 0) e.error("l0", "must be a multiple of 3");
    const double m0 = e.number("m0", above(0), 1.0);
    e.number("q0", any_real(), -2.0);
    e.number("zeta", open_range(1, 2), 1.5);
    e.integer("steps", closed_range(1, 60), 10);
    e.number("c1", at_least(0), 0.0);
    e.number("c2", at_least(0), 0.0);
    e.number("c3", above(0), 1.0);
    e.number("xi", above(0), 2.0);
    e.integer("d", closed_range(1, 2), 1);
    const double mc = e.number("m0_constant", at_least(0), 0.0);
    if (e.ok("l0") && e.ok("m0") && e.ok("m0_constant") && m0 < mc * std::pow(static_cast<double>(l0), -0.25))
      e.error("m0", "must be >= m0_constant * l0^(-1/4)");
    e.number("q", above(0), 2.0);
    e.number("alpha", open_range(0, 1), 0.25);
  } else if (name == "m-regularity") {
    const long c = e.integer("cells", positive_int, 27);
    cross_grid(e, "cells", mf, c);
    e.number("energy", any_real(), 0.3);
    const double delta = e.number("delta", above(0), 2.0);
    if (e.ok("cells") && e.ok("delta") && static_cast<double>(c) < 12 * delta)
      e.error("delta", "box side cells must be >= 12 delta");
    e.number("mass", at_least(0), 0.1);
    e.numbers("eps", at_least(0), std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4});
  }
  e.finish();
}

inline long default_samples(const std::string& name) {
  static const std::map<std::string, long> m{{"bandstructure", 1}, {"ids", 1},         {"lifshitz", 500},
                                             {"ids-diff", 200},    {"hs-check", 1},    {"ct-decay", 1},
                                             {"gap-prob", 300},    {"theta-bounds", 200}, {"msa-schedule", 1},
                                             {"m-regularity", 100}};
  auto it = m.find(name);
  return it == m.end() ? 1 : it->second;
}

struct Validation {
  json resolved = json::object();
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
  std::string experiment() const { return resolved.value("experiment", json::object()).value("name", ""); }
};

/// Range and consistency checks without running anything. `subcommand`, when
/// given, supplies a missing experiment.name and must match a present one.
inline Validation validate(const json& raw, const std::string& subcommand = "") {
  Validation v;
  if (!raw.is_object()) {
    v.errors.push_back("config: expected a JSON object at the top level");
    return v;
  }
  static const std::set<std::string> top{"model", "experiment", "execution"};
  for (const auto& [k, val] : raw.items())
    if (!top.count(k)) v.errors.push_back(k + ": unknown key");

  // Experiment name first: it decides what the model block must contain.
  std::string name = subcommand;
  const json* exp = raw.contains("experiment") ? &raw.at("experiment") : nullptr;
  if (!exp) {
    v.errors.push_back("experiment: missing required block");
  } else if (!exp->is_object()) {
    v.errors.push_back("experiment: expected an object");
    exp = nullptr;
  } else if (exp->contains("name")) {
    const json& n = exp->at("name");
    if (!n.is_string()) {
      v.errors.push_back("experiment.name: expected a string");
      name.clear();
    } else if (!subcommand.empty() && n.get<std::string>() != subcommand) {
      v.errors.push_back("experiment.name: '" + n.get<std::string>() + "' does not match subcommand '" +
                         subcommand + "'");
    } else {
      name = n.get<std::string>();
    }
  } else if (subcommand.empty()) {
    v.errors.push_back("experiment.name: missing required field");
  }
  const auto& names = experiment_names();
  const bool name_ok = !name.empty() && std::find(names.begin(), names.end(), name) != names.end();
  if (!name.empty() && !name_ok) v.errors.push_back("experiment.name: unknown experiment '" + name + "'");

  // Execution block.
  static const json empty = json::object();
  const json* ex = raw.contains("execution") ? &raw.at("execution") : &empty;
  Section es(ex, &v.resolved["execution"], "execution", &v.errors);
  const std::uint64_t seed = es.unsigned_integer("seed", 0);
  es.integer("samples", at_least(1), name_ok ? default_samples(name) : 1);
  es.integer("threads", closed_range(1, 1024), default_threads());
  es.text("output", std::string("runs"));
  es.finish();

  // Model block.
  ModelFacts mf;
  const ModelNeed need = name_ok ? model_need(name) : ModelNeed::Full;
  if (raw.contains("model") || (name_ok && need != ModelNeed::None)) {
    const std::size_t before = v.errors.size();
    Section ms(raw.contains("model") ? &raw.at("model") : &empty, &v.resolved["model"], "model", &v.errors);
    if (!raw.contains("model")) {
      v.errors.push_back("model: missing required block");
    } else {
      resolve_model(ms, need);
    }
    if (v.errors.size() == before && name_ok) {
      try {
        const AndersonModel model = build_model(v.resolved["model"], seed);
        model.validate();
        const auto rep = validate_single_site(model.u);
        if (need == ModelNeed::Full && !rep.pass())
          for (const auto& f : rep.failures) v.errors.push_back("model.u: " + f);
        mf.ok = true;
        mf.dimension = model.dimension();
        mf.points_per_cell = model.points_per_cell();
        if (name == "gap-prob" || name == "theta-bounds" || name == "lifshitz" || name == "ids")
          mf.band_bottom = h0_band_bottom(model.v0);
      } catch (const std::exception& e) {
        v.errors.push_back(std::string("model: ") + e.what());
      }
    }
  }

  if (exp && name_ok) {
    Section e(exp, &v.resolved["experiment"], "experiment", &v.errors);
    e.skip("name");
    v.resolved["experiment"]["name"] = name;
    resolve_experiment(e, name, mf);
  } else if (!exp && name_ok) {
    v.resolved["experiment"]["name"] = name;
  }
  return v;
}

/// Parses a config file; syntax errors surface as ValidationError.
inline json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Hashing

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex16(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Hash of the resolved config without the fields that cannot change results
/// (thread count and output directory).
inline std::string config_hash(const json& resolved) {
  json c = resolved;
  if (c.contains("execution")) {
    c["execution"].erase("threads");
    c["execution"].erase("output");
  }
  return hex16(fnv1a(c.dump()));
}

// ---------------------------------------------------------------------------
// Experiments

struct Outcome {
  std::map<std::string, std::string> files;  ///< payload file name -> content
  json summary = json::object();
  std::string line;
  bool has_check = false;
  bool check_passed = true;
};

struct Context {
  const json& experiment;
  std::optional<AndersonModel> model;
  std::uint64_t seed = 0;
  long samples = 1;
  int threads = 1;
};

namespace detail {

inline std::string fmt(double x, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

template <class F>
std::string csv(F&& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

inline std::vector<double> linspace(double lo, double hi, long n) {
  std::vector<double> v;
  for (long i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  return v;
}

inline Point theta_of(const json& e, const std::string& key) {
  const auto th = e.at(key).get<std::vector<double>>();
  return {th[0], th.size() > 1 ? th[1] : 0.0};
}

inline Outcome run_bandstructure(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const long l = e.at("l").get<long>();
  const auto zone = brillouin_zone(l, m.dimension());
  const auto bands = compute_bands(h0_factory(m.v0, l), zone, e.at("resolution").get<int>(),
                                   e.at("bands").get<int>(), c.threads);
  const auto edges = find_band_edges(bands, e.at("gap_tolerance").get<double>());
  RegularityOptions opt;
  opt.fd_step = e.at("fd_step").get<double>();
  const auto reg = check_regularity(bands, edges.front().energy, opt);
  Outcome o;
  o.files["bands.csv"] = csv([&](std::ostream& os) { write_bands_csv(os, bands); });
  json je = json::array();
  for (const auto& ed : edges) je.push_back({{"energy", ed.energy}, {"kind", ed.kind == EdgeKind::Lower ? "lower" : "upper"}});
  json jm = json::array();
  for (const auto& mz : reg.minimizers) {
    json h = json::array();
    for (Eigen::Index i = 0; i < mz.hessian.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < mz.hessian.cols(); ++j) row.push_back(mz.hessian(i, j));
      h.push_back(row);
    }
    jm.push_back({{"band", mz.band + 1},
                  {"theta", {mz.theta[0], mz.theta[1]}},
                  {"hessian", h},
                  {"min_eigenvalue", mz.min_eigenvalue},
                  {"on_boundary", mz.on_boundary}});
  }
  const double xi = estimate_lipschitz(bands, -std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  o.summary = {{"edges", je},
               {"bottom_edge", {{"energy", reg.edge}, {"regular", reg.regular}, {"minimizers", jm}}},
               {"lipschitz", xi}};
  o.line = "bottom edge " + fmt(reg.edge) + (reg.regular ? " (regular)" : " (not regular)") + ", " +
           std::to_string(edges.size() / 2) + " band interval(s), Lipschitz " + fmt(xi);
  return o;
}

inline Outcome run_ids(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const auto energies = linspace(e.at("energy_min").get<double>(), e.at("energy_max").get<double>(),
                                 e.at("energy_count").get<long>());
  DisorderAverage avg;
  if (e.at("method") == "dirichlet") {
    avg = box_ids_average(m, e.at("cells").get<long>(), energies, c.samples, c.threads);
  } else {
    const long l = e.at("l").get<long>();
    const int res = e.at("theta_resolution").get<int>();
    const SiteBox sites = SiteBox::symmetric(m.dimension(), l);
    auto curves = parallel_map(static_cast<std::size_t>(c.samples), c.threads, [&](std::size_t k) {
      return ids_periodic_approx(m, m.draw(sites, k), l, energies, res);
    });
    avg = average_ids(curves);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < avg.mean.size(); ++i) monotone = monotone && avg.mean[i] >= avg.mean[i - 1];
  Outcome o;
  o.files["ids.csv"] = csv([&](std::ostream& os) { write_ids_csv(os, avg); });
  o.summary = {{"monotone", monotone}, {"samples", avg.samples}, {"ids_at_energy_max", avg.mean.back()}};
  o.line = "N(" + fmt(energies.back()) + ") = " + fmt(avg.mean.back()) + " over " + std::to_string(avg.samples) +
           " sample(s)";
  return o;
}

inline Outcome run_lifshitz(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const double edge = e.at("edge").get<double>();
  const auto energies = log_energies(edge, e.at("energy_lo").get<double>(), e.at("energy_hi").get<double>(),
                                     e.at("energy_count").get<int>());
  const auto avg = box_ids_average(m, e.at("cells").get<long>(), energies, c.samples, c.threads);
  const auto fit = lifshitz_fit(avg, edge, m.dimension(), e.at("window_lo").get<double>(),
                                e.at("window_hi").get<double>());
  Outcome o;
  o.files["ids.csv"] = csv([&](std::ostream& os) { write_ids_csv(os, avg); });
  o.summary = {{"kappa", fit.kappa},           {"kappa_half_width", fit.half_width},
               {"intercept", fit.intercept},   {"residual", fit.residual},
               {"points", fit.points},         {"target", -0.5 * m.dimension()},
               {"within_0.15_of_target", fit.lifshitz}, {"samples", avg.samples}};
  o.line = "kappa = " + fmt(fit.kappa) + " +- " + fmt(fit.half_width, 3) + " (target " +
           fmt(-0.5 * m.dimension()) + ", " + std::to_string(fit.points) + " points)";
  return o;
}

inline Outcome run_ids_diff(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const auto g = plateau_function(e.at("plateau_energy").get<double>(), e.at("plateau_order").get<int>());
  const auto ls = e.at("l").get<std::vector<long>>();
  const auto t = ids_difference_experiment(m, g, ls, c.samples, e.at("reference_l").get<long>(),
                                           e.at("theta_resolution").get<int>(), c.threads);
  const bool trend = decreasing_beyond_floor(t);
  const bool halved = t.rows.size() < 2 || t.rows.back().delta <= 0.5 * t.rows.front().delta;
  Outcome o;
  o.files["differences.csv"] = csv([&](std::ostream& os) { write_difference_csv(os, t); });
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"l", r.l}, {"functional", r.functional}, {"reference", r.reference}, {"delta", r.delta},
                    {"delta_stderr", r.delta_stderr}, {"floor", r.floor}});
  o.summary = {{"reference_l", t.reference_l},
               {"samples", t.samples},
               {"reference_local", t.reference_local},
               {"reference_local_stderr", t.reference_local_stderr},
               {"reference_box", t.reference_box},
               {"reference_box_stderr", t.reference_box_stderr},
               {"rows", rows},
               {"decreasing_beyond_floor", trend},
               {"last_at_most_half_first", halved}};
  o.has_check = true;
  o.check_passed = trend && halved;
  std::string d;
  for (const auto& r : t.rows) d += (d.empty() ? "" : ", ") + std::string("l=") + std::to_string(r.l) + ": " + fmt(r.delta, 3);
  o.line = "Delta " + d + (o.check_passed ? " (trend holds)" : " (trend fails)");
  return o;
}

inline QuadratureSpec quadrature_of(const json& q) {
  QuadratureSpec s;
  s.scheme = q.at("scheme") == "midpoint" ? QuadratureScheme::Midpoint : QuadratureScheme::GaussPanels;
  s.x_panels = q.at("x_panels").get<int>();
  s.y_levels = q.at("y_levels").get<int>();
  s.y_ratio = q.at("y_ratio").get<double>();
  s.y_outer_panels = q.at("y_outer_panels").get<int>();
  s.eps_y = q.at("eps_y").get<double>();
  return s;
}

inline Outcome run_hs_check(const Context& c) {
  const auto& e = c.experiment;
  const int n = e.at("plateau_order").get<int>();
  const auto g = plateau_function(e.at("plateau_energy").get<double>(), n);
  const long dim = e.at("dimension").get<long>();
  const long count = e.at("matrices").get<long>();
  const auto quad = quadrature_of(e.at("quadrature"));
  const auto fine = quad.refined();
  struct Row {
    double coarse, refined;
  };
  auto rows = parallel_map(static_cast<std::size_t>(count), c.threads, [&](std::size_t k) {
    const auto A = random_hermitian(dim, c.seed, k);
    const auto ref = matrix_function_eig(A, g);
    return Row{operator_norm(matrix_function_hs(A, g, n, quad) - ref),
               operator_norm(matrix_function_hs(A, g, n, fine) - ref)};
  });
  const int grid = e.at("dbar_grid").get<int>();
  const auto dbar = dbar_bound_check(extend(g, n), grid, grid);
  double worst = 0, worst_fine = 0, min_gain = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    worst = std::max(worst, r.coarse);
    worst_fine = std::max(worst_fine, r.refined);
    min_gain = std::min(min_gain, r.coarse / std::max(r.refined, std::numeric_limits<double>::min()));
  }
  const double tol = e.at("tolerance").get<double>();
  const double gain = e.at("min_refinement_gain").get<double>();
  Outcome o;
  o.files["errors.csv"] = csv([&](std::ostream& os) {
    os.precision(17);
    os << "matrix,error,error_refined\n";
    for (std::size_t k = 0; k < rows.size(); ++k) os << k << ',' << rows[k].coarse << ',' << rows[k].refined << '\n';
  });
  o.summary = {{"max_error", worst},
               {"max_error_refined", worst_fine},
               {"min_refinement_gain", min_gain},
               {"dbar_samples", dbar.samples},
               {"dbar_violations", dbar.violations},
               {"dbar_max_ratio", dbar.max_ratio},
               {"dbar_near_axis_mismatch", dbar.max_near_axis_mismatch}};
  o.has_check = true;
  o.check_passed = worst <= tol && min_gain >= gain && dbar.pass();
  o.line = "max error " + fmt(worst, 3) + ", refined " + fmt(worst_fine, 3) + ", min gain " + fmt(min_gain, 3) +
           ", dbar violations " + std::to_string(dbar.violations);
  return o;
}

inline Outcome run_ct_decay(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const GridSpec grid = m.box(e.at("cells").get<long>());
  const SiteBox sites = m.coupling_sites(grid);
  const auto sample = e.at("with_disorder").get<bool>() ? m.draw(sites, 0) : DisorderSample::constant(sites, 0.0);
  const auto h = m.dirichlet_box(grid, sample);
  const std::complex<double> z(e.at("z_re").get<double>(), e.at("z_im").get<double>());
  const long a = e.at("anchor").get<long>();
  const auto prof = combes_thomas_profile(h, z, {a, 0}, e.at("max_distance").get<long>());
  Outcome o;
  o.files["decay.csv"] = csv([&](std::ostream& os) { write_decay_csv(os, prof); });
  o.summary = {{"rate", prof.rate},
               {"prefactor", prof.prefactor},
               {"r_squared", prof.r_squared},
               {"spectral_distance", prof.spectral_distance},
               {"rate_per_distance", prof.rate_per_distance}};
  // Free unit-step chain: the Toeplitz resolvent decays like exp(-r|n|), cosh r = 1 - z/2.
  const bool free_chain = m.dimension() == 1 && m.points_per_cell() == 1 && !e.at("with_disorder").get<bool>() &&
                          m.v0.at_cell_point(0) == 0.0 && z.imag() == 0.0 && z.real() < 0.0;
  if (free_chain) o.summary["analytic_rate"] = std::acosh(1.0 - 0.5 * z.real());
  o.has_check = true;
  o.check_passed = prof.rate > 0;
  o.line = "decay rate " + fmt(prof.rate) + " (R^2 " + fmt(prof.r_squared, 4) + ")" +
           (free_chain ? ", analytic " + fmt(std::acosh(1.0 - 0.5 * z.real())) : "");
  return o;
}

inline Outcome run_gap_prob(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const auto ls = e.at("l").get<std::vector<long>>();
  const double alpha = e.at("alpha").get<double>();
  BoundaryCondition bc = Periodic{};
  if (e.at("bc") == "theta") {
    const Point th = theta_of(e, "theta0");
    bc = Theta{{th[0], th[1]}};
  }
  std::vector<GapProbabilityEstimate> est;
  for (long l : ls) est.push_back(gap_probability(m, l, alpha, bc, c.samples, c.threads));
  bool trend = true;
  for (std::size_t i = 1; i < est.size(); ++i) {
    const double a = est[i - 1].estimate, b = est[i].estimate;
    trend = trend && (b < a || (a == 0.0 && b == 0.0));
  }
  Outcome o;
  o.files["gap.csv"] = csv([&](std::ostream& os) {
    os.precision(17);
    os << "l,samples,hits,estimate,wilson_lo,wilson_hi\n";
    for (const auto& g : est)
      os << g.l << ',' << g.samples << ',' << g.hits << ',' << g.estimate << ',' << g.interval.lo << ','
         << g.interval.hi << '\n';
  });
  json rows = json::array();
  for (const auto& g : est)
    rows.push_back({{"l", g.l}, {"hits", g.hits}, {"samples", g.samples}, {"estimate", g.estimate},
                    {"wilson", {g.interval.lo, g.interval.hi}}});
  o.summary = {{"alpha", alpha}, {"bc", est.front().bc}, {"rows", rows}, {"decreasing", trend}};
  o.has_check = true;
  o.check_passed = trend;
  std::string d;
  for (const auto& g : est)
    d += (d.empty() ? "" : ", ") + std::string("l=") + std::to_string(g.l) + ": " + fmt(g.estimate, 4) + " [" +
         fmt(g.interval.lo, 3) + ", " + fmt(g.interval.hi, 3) + "]";
  o.line = "P(gap) " + d + (trend ? " (decreasing)" : " (not decreasing)");
  return o;
}

inline json inequality_json(const InequalityReport& r) {
  return {{"lhs", r.lhs},     {"rhs", r.rhs},   {"std_error", r.std_error}, {"slack", r.slack},
          {"samples", r.samples}, {"pass", r.pass}, {"c8", r.c8}, {"c9", r.c9}, {"xi", r.xi}};
}

inline Outcome run_theta_bounds(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const long l = e.at("l").get<long>();
  const int res = e.at("theta_resolution").get<int>();
  const auto avg = theta_average_check(m, l, e.at("energy_average").get<double>(), c.samples, res, c.threads);
  const auto win = e.at("lipschitz_window").get<std::vector<double>>();
  const double xi = periodic_approx_lipschitz(m, l, c.samples, e.at("lipschitz_resolution").get<int>(), win[0],
                                              win[1], c.threads);
  const auto fixed = fixed_theta_check(m, l, e.at("energy_fixed").get<double>(), theta_of(e, "theta0"),
                                       c.samples, xi, res, c.threads);
  Outcome o;
  o.summary = {{"theta_average", inequality_json(avg)}, {"fixed_theta", inequality_json(fixed)}, {"lipschitz", xi}};
  o.has_check = true;
  o.check_passed = avg.pass && fixed.pass;
  o.line = "theta-average " + fmt(avg.lhs, 4) + " <= " + fmt(avg.rhs, 4) + (avg.pass ? " ok" : " FAILS") +
           "; fixed-theta " + fmt(fixed.lhs, 4) + " <= " + fmt(fixed.rhs, 4) + (fixed.pass ? " ok" : " FAILS");
  return o;
}

inline Outcome run_msa(const Context& c) {
  const auto& e = c.experiment;
  MsaConstants k;
  k.c1 = e.at("c1").get<double>();
  k.c2 = e.at("c2").get<double>();
  k.c3 = e.at("c3").get<double>();
  k.xi = e.at("xi").get<double>();
  k.d = e.at("d").get<int>();
  const double m0 = e.at("m0").get<double>();
  const auto s = msa_schedule(e.at("l0").get<long>(), m0, e.at("q0").get<double>(), e.at("zeta").get<double>(),
                              e.at("steps").get<int>(), k, e.at("m0_constant").get<double>());
  const auto feas = alpha_n_feasible(e.at("q").get<double>(), k.d, e.at("alpha").get<double>());
  Outcome o;
  o.files["schedule.csv"] = csv([&](std::ostream& os) {
    os.precision(17);
    os << "j,l,log_l,m,m_ratio,q\n";
    for (std::size_t j = 0; j < s.l.size(); ++j)
      os << j << ',' << to_string(s.l[j]) << ',' << s.log_l[j] << ',' << s.m[j] << ',' << s.m[j] / m0 << ','
         << s.q[j] << '\n';
  });
  json ls = json::array();
  for (const auto& l : s.l) ls.push_back(to_string(l));
  o.summary = {{"l", ls},
               {"masses_positive", s.masses_positive},
               {"masses_decreasing", s.masses_decreasing},
               {"limit_estimate", s.limit_estimate},
               {"bounded_below", s.bounded_below},
               {"feasible_n", feas.n},
               {"alpha_below_quarter", feas.alpha_below_quarter}};
  o.line = "l1 = " + to_string(s.l[1]) + (s.l.size() > 2 ? ", l2 = " + to_string(s.l[2]) : "") +
           ", m_J/m_0 -> " + fmt(s.limit_estimate) + ", n = " + std::to_string(feas.n);
  return o;
}

inline Outcome run_m_regularity(const Context& c) {
  const auto& e = c.experiment;
  const auto& m = *c.model;
  const auto r = m_regularity_rate(m, e.at("cells").get<long>(), e.at("energy").get<double>(),
                                   e.at("delta").get<double>(), e.at("mass").get<double>(), c.samples,
                                   e.at("eps").get<std::vector<double>>(), c.threads);
  Outcome o;
  o.summary = {{"samples", r.samples}, {"passes", r.passes}, {"rate", r.rate},
               {"wilson", {r.interval.lo, r.interval.hi}}};
  o.line = "m-regular fraction " + fmt(r.rate, 4) + " [" + fmt(r.interval.lo, 3) + ", " + fmt(r.interval.hi, 3) + "]";
  return o;
}

}  // namespace detail

/// Runs a resolved config in memory. Throws ValidationError / NumericalError.
inline Outcome run(const json& resolved) {
  const json& e = resolved.at("experiment");
  const std::string name = e.at("name").get<std::string>();
  const json& x = resolved.at("execution");
  Context c{e, std::nullopt, x.at("seed").get<std::uint64_t>(), x.at("samples").get<long>(), x.at("threads").get<int>()};
  if (model_need(name) != ModelNeed::None) c.model = build_model(resolved.at("model"), c.seed);
  static const std::map<std::string, std::function<Outcome(const Context&)>> table{
      {"bandstructure", detail::run_bandstructure}, {"ids", detail::run_ids},
      {"lifshitz", detail::run_lifshitz},           {"ids-diff", detail::run_ids_diff},
      {"hs-check", detail::run_hs_check},           {"ct-decay", detail::run_ct_decay},
      {"gap-prob", detail::run_gap_prob},           {"theta-bounds", detail::run_theta_bounds},
      {"msa-schedule", detail::run_msa},            {"m-regularity", detail::run_m_regularity}};
  auto it = table.find(name);
  if (it == table.end()) throw ValidationError("unknown experiment '" + name + "'");
  Outcome o = it->second(c);
  o.files["summary.json"] = o.summary.dump(2) + "\n";
  return o;
}

// ---------------------------------------------------------------------------
// Run directory

struct RunResult {
  int exit_code = kExitOk;
  std::filesystem::path directory;
  std::string config_hash;
  std::string payload_hash;
  std::string line;
};

inline std::string payload_hash(const std::map<std::string, std::string>& files) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, content] : files) {
    h = fnv1a(name, h);
    h = fnv1a(std::string_view("\0", 1), h);
    h = fnv1a(content, h);
  }
  return hex16(h);
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw NumericalError("cannot write " + p.string());
}

/// Runs a resolved config into <output>/<hash>-<timestamp>/. A FAILED marker
/// exists for the whole run and is removed only after every payload file and
/// the envelope are written; on error it holds the message.
inline RunResult execute(const json& resolved) {
  namespace fs = std::filesystem;
  RunResult res;
  res.config_hash = config_hash(resolved);
  const fs::path root = resolved.at("execution").at("output").get<std::string>();
  const std::string stem = res.config_hash + "-" + utc_timestamp();
  fs::create_directories(root);
  fs::path dir = root / stem;
  for (int k = 2; fs::exists(dir); ++k) dir = root / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  res.directory = dir;
  const fs::path marker = dir / "FAILED";
  write_file(marker, "run incomplete\n");
  write_file(dir / "resolved_config.json", resolved.dump(2) + "\n");

  const auto t0 = std::chrono::steady_clock::now();
  json env = {{"config_hash", res.config_hash},
              {"tool_version", kToolVersion},
              {"experiment", resolved.at("experiment").at("name")}};
  try {
    const Outcome o = run(resolved);
    for (const auto& [name, content] : o.files) write_file(dir / name, content);
    res.payload_hash = payload_hash(o.files);
    res.line = o.line;
    res.exit_code = o.has_check && !o.check_passed ? kExitCheck : kExitOk;
    json names = json::array();
    for (const auto& [name, content] : o.files) names.push_back(name);
    env["payload"] = names;
    env["payload_hash"] = res.payload_hash;
    env["status"] = res.exit_code == kExitOk ? "ok" : "check-failed";
    env["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file(dir / "envelope.json", env.dump(2) + "\n");
    fs::remove(marker);
  } catch (const std::exception& ex) {
    res.exit_code = dynamic_cast<const ValidationError*>(&ex) ? kExitValidation : kExitNumerical;
    res.line = ex.what();
    env["status"] = "failed";
    env["error"] = ex.what();
    env["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file(dir / "envelope.json", env.dump(2) + "\n");
    write_file(marker, std::string(ex.what()) + "\n");
  }
  return res;
}

}  // namespace rso::runner
