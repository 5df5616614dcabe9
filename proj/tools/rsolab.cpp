// rsolab: command-line front end for the experiments.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rso/runner.hpp"

namespace {

using rso::runner::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool validate_only = false;
};

int dispatch(const std::string& experiment, const Flags& f) {
  namespace rr = rso::runner;
  json raw;
  try {
    raw = rr::load_config(f.config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rr::kExitValidation;
  }
  if (raw.is_object() && (f.seed || f.out || f.threads)) {
    json& ex = raw["execution"];
    if (ex.is_null()) ex = json::object();
    if (ex.is_object()) {
      if (f.seed) ex["seed"] = *f.seed;
      if (f.out) ex["output"] = *f.out;
      if (f.threads) ex["threads"] = *f.threads;
    }
  }
  const auto v = rr::validate(raw, experiment);
  if (!v.ok()) {
    std::cerr << v.errors.size() << " validation error(s):\n";
    for (const auto& e : v.errors) std::cerr << "  " << e << '\n';
    return rr::kExitValidation;
  }
  if (f.validate_only) {
    std::cout << "config valid (" << rr::config_hash(v.resolved) << ")\n" << v.resolved.dump(2) << '\n';
    return rr::kExitOk;
  }
  const auto r = rr::execute(v.resolved);
  const char* tag = r.exit_code == rr::kExitOk      ? "ok"
                    : r.exit_code == rr::kExitCheck ? "CHECK FAILED"
                                                    : "FAILED";
  std::ostream& os = r.exit_code == rr::kExitOk ? std::cout : std::cerr;
  os << experiment << " [" << r.config_hash << "] " << tag << ": " << r.line << " -> " << r.directory.string()
     << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments on random Schrodinger operators near band edges"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const auto& name : rso::runner::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (overrides execution.seed)");
    sub->add_option("--out", flags.out, "output root directory (overrides execution.output)");
    sub->add_option("--threads", flags.threads, "worker threads (overrides execution.threads)")
        ->check(CLI::Range(1, 1024));
    sub->add_flag("--validate-only", flags.validate_only, "check the config and print the resolved form");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : rso::runner::kExitValidation;
  }
  return dispatch(chosen, flags);
}
