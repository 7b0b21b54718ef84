// cpgbench: runs adaptive / uniform / classical Radau experiments from JSON configs.
//
//   cpgbench run configs/heat_linear_adaptive.json --out results/heat
//   cpgbench sweep configs/a.json configs/b.json --out results/sweep
//   cpgbench rate results/heat.csv --column eta_total

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <cpgts/cpgts.hpp>

namespace {

using nlohmann::json;

struct Overrides {
  std::optional<std::string> problem, scheme, mode, out;
  std::optional<double> theta;
  std::optional<std::uint64_t> seed;
};

void add_override_flags(CLI::App& app, Overrides& o) {
  app.add_option("--problem", o.problem, "Problem name (linear, vdp, vdp-eps, predator-prey, heat-linear, heat-nonlinear)");
  app.add_option("--scheme", o.scheme, "trapezoid | simpson | lobatto:m | radau:m | gauss:m");
  app.add_option("--theta", o.theta, "Doerfler parameter in (0,1)");
  app.add_option("--mode", o.mode, "adaptive | uniform | classical_radau");
  app.add_option("--out", o.out, "Output prefix; writes <out>.csv, <out>.jsonl and <out>.mesh.json");
  app.add_option("--seed", o.seed, "Seed recorded with the run");
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("'" + path + "': " + e.what());
  }
}

void apply(json& cfg, const Overrides& o) {
  if (o.problem) {
    // a new problem name drops parameters that belong to the old one
    if (!cfg.contains("problem") || cfg["problem"].is_string() || cfg["problem"].value("name", "") != *o.problem)
      cfg["problem"] = json{{"name", *o.problem}};
  }
  if (o.scheme) cfg["scheme"] = *o.scheme;
  if (o.mode) cfg["mode"] = *o.mode;
  if (o.theta) cfg["adaptive"]["theta"] = *o.theta;
  if (o.seed) cfg["seed"] = *o.seed;
}

void write_outputs(const cpgts::ExperimentConfig& cfg, const cpgts::ExperimentResult& res,
                   const std::optional<std::string>& prefix) {
  std::string csv = cfg.csv_path, jsonl = cfg.jsonl_path, mesh;
  if (prefix) {
    csv = *prefix + ".csv";
    jsonl = *prefix + ".jsonl";
    mesh = *prefix + ".mesh.json";
  }
  if (csv.empty() && jsonl.empty()) {
    std::cout << cpgts::to_csv(res.rows);
    return;
  }
  if (!csv.empty()) cpgts::emit(res.rows, cpgts::EmitFormat::Csv, csv);
  if (!jsonl.empty()) cpgts::emit(res.rows, cpgts::EmitFormat::Jsonl, jsonl);
  if (!mesh.empty() && res.final_mesh) {
    json m{{"breakpoints", cpgts::to_json(*res.final_mesh)},
           {"eta", res.final_estimates ? cpgts::to_json(*res.final_estimates) : json::array()},
           {"reference", res.reference_provenance},
           {"seed", cfg.seed}};
    std::ofstream f(mesh);
    if (!f) throw std::runtime_error("cannot open '" + mesh + "' for writing");
    f << m.dump() << '\n';
  }
}

void run_one(json cfg_json, const Overrides& o, const std::optional<std::string>& prefix) {
  apply(cfg_json, o);
  const cpgts::ExperimentConfig cfg = cpgts::config_from_json(cfg_json);
  const cpgts::ExperimentResult res = cpgts::run_experiment(cfg);
  write_outputs(cfg, res, prefix);
}

std::vector<cpgts::ResultRow> read_rows(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  const bool is_jsonl = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
  return is_jsonl ? cpgts::rows_from_jsonl(f) : cpgts::rows_from_csv(f);
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive continuous Petrov-Galerkin time stepping experiments"};
  app.require_subcommand(1);

  Overrides run_o;
  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", run_config, "JSON config file")->required()->check(CLI::ExistingFile);
  add_override_flags(*run, run_o);

  Overrides sweep_o;
  std::vector<std::string> sweep_configs;
  auto* sweep = app.add_subcommand("sweep", "Run several configs; a file may also hold an array of configs");
  sweep->add_option("configs", sweep_configs, "JSON config files")->required()->check(CLI::ExistingFile);
  add_override_flags(*sweep, sweep_o);

  std::string rate_file, rate_column = "eta_total", rate_mode;
  auto* rate = app.add_subcommand("rate", "Observed rate of a result column against the interval count");
  rate->add_option("file", rate_file, "Result file (.csv or .jsonl)")->required()->check(CLI::ExistingFile);
  rate->add_option("--column", rate_column, "eta_total | h1_error | linf_error")
      ->check(CLI::IsMember({"eta_total", "h1_error", "linf_error"}));
  rate->add_option("--mode", rate_mode, "Only use rows of this mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*run) {
      run_one(read_json_file(run_config), run_o, run_o.out);
    } else if (*sweep) {
      std::vector<json> configs;
      for (const auto& path : sweep_configs) {
        json j = read_json_file(path);
        if (j.is_array())
          for (auto& c : j) configs.push_back(c);
        else
          configs.push_back(j);
      }
      for (std::size_t k = 0; k < configs.size(); ++k) {
        std::optional<std::string> prefix;
        if (sweep_o.out) prefix = *sweep_o.out + "_" + std::to_string(k);
        run_one(configs[k], sweep_o, prefix);
      }
    } else if (*rate) {
      std::vector<double> n, v;
      for (const auto& r : read_rows(rate_file)) {
        if (!rate_mode.empty() && r.mode != rate_mode) continue;
        std::optional<double> value = r.eta_total;
        if (rate_column == "h1_error") value = r.h1_error;
        if (rate_column == "linf_error") value = r.linf_error;
        if (!value) continue;
        n.push_back(static_cast<double>(r.n_intervals));
        v.push_back(*value);
      }
      const double slope = cpgts::observed_rate(n, v);
      std::cout << json{{"rate", slope}, {"column", rate_column}, {"points", n.size()}}.dump() << '\n';
    }
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what(), 1);
  } catch (const nlohmann::json::exception& e) {
    return fail("config", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
