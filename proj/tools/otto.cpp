#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otto/config.hpp"
#include "otto/error.hpp"
#include "otto/io.hpp"
#include "otto/run.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out = "otto-run";
  std::optional<std::uint64_t> seed;
  std::string tiers;
  std::string dims;
  std::optional<double> dt;
  std::optional<double> t_end;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "TOML scenario file");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--seed", o.seed, "classical-ensemble seed");
  app->add_option("--tiers", o.tiers, "comma list of quantum-lindblad, quantum-moments, semiclassical, classical");
  app->add_option("--dims", o.dims, "truncation as hf,lf");
  app->add_option("--dt", o.dt, "integration step");
  app->add_option("--t-end", o.t_end, "final time");
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

otto::ScenarioConfig resolve(const Overrides& o) {
  otto::ScenarioConfig c = o.config.empty() ? otto::parse_config_toml(otto::default_config_toml(), "<defaults>")
                                            : otto::load_config(o.config);
  if (o.seed) c.ensemble.seed = *o.seed;
  if (!o.tiers.empty()) {
    c.tiers.clear();
    for (const std::string& t : split(o.tiers)) {
      try {
        c.tiers.push_back(otto::tier_from_string(t));
      } catch (const otto::Error& e) {
        throw otto::ConfigError("--tiers", e.what());
      }
    }
  }
  if (!o.dims.empty()) {
    const auto parts = split(o.dims);
    if (parts.size() != 2) throw otto::ConfigError("--dims", "expected hf,lf");
    try {
      c.dims.hf = std::stoi(parts[0]);
      c.dims.lf = std::stoi(parts[1]);
    } catch (const std::exception&) {
      throw otto::ConfigError("--dims", "expected two integers");
    }
  }
  if (o.dt) c.integration.dt = *o.dt;
  if (o.t_end) c.integration.t_end = *o.t_end;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for a two-resonator quantum Otto engine"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the default TOML configuration");

  Overrides run_o, sweep_o, steady_o;
  CLI::App* run = app.add_subcommand("run", "run one scenario");
  add_common(run, run_o);

  CLI::App* sweep = app.add_subcommand("sweep", "sweep one numeric parameter");
  add_common(sweep, sweep_o);
  std::string param = "engine.nbar_h";
  std::string values;
  sweep->add_option("--param", param, "dotted parameter path");
  sweep->add_option("--values", values, "comma list of values")->required();

  CLI::App* steady = app.add_subcommand("steady", "constant-drive steady state against the closed forms");
  add_common(steady, steady_o);

  CLI::App* validate = app.add_subcommand("validate", "run the invariant and oracle checks");

  std::string run_dir;
  CLI::App* report = app.add_subcommand("report", "cycle summary of an existing run directory");
  report->add_option("run_dir", run_dir, "directory written by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_config) {
      std::cout << otto::default_config_toml();
      return 0;
    }
    if (*run) {
      const otto::ScenarioConfig cfg = resolve(run_o);
      const otto::RunManifest m = otto::run_scenario(cfg, run_o.out);
      std::cout << m.to_json().dump(2) << "\n";
      return m.success ? 0 : 2;
    }
    if (*sweep) {
      const otto::ScenarioConfig cfg = resolve(sweep_o);
      std::vector<double> vals;
      for (const std::string& v : split(values)) {
        try {
          vals.push_back(std::stod(v));
        } catch (const std::exception&) {
          throw otto::ConfigError("--values", "cannot parse '" + v + "'");
        }
      }
      const otto::SweepResult s = otto::run_sweep(cfg, param, vals, sweep_o.out);
      std::cout << otto::sweep_csv(s);
      return s.all_ok() ? 0 : 2;
    }
    if (*steady) {
      std::cout << otto::steady_report(resolve(steady_o)).dump(2) << "\n";
      return 0;
    }
    if (*validate) {
      bool ok = true;
      for (const otto::ValidationCheck& c : otto::run_validation()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    }
    if (*report) {
      std::cout << otto::report_run(run_dir).dump(2) << "\n";
      return 0;
    }
    std::cout << app.help();
    return 0;
  } catch (const otto::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
