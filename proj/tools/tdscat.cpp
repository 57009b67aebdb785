#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "tdscat/experiments.hpp"

using namespace tdscat;

namespace {

void print_list() {
  for (const auto& e : list_experiments())
    std::printf("%-20s %s\n%-20s [%s]\n", e.name.c_str(), e.description.c_str(), "", e.anchor.c_str());
}

void print_summary(const RunReport& rep, const std::vector<std::string>& artifacts, bool strict) {
  std::printf("experiment  %s\nconfig hash %s\nseed        %llu\n\n", rep.experiment.c_str(), rep.config_hash.c_str(),
              static_cast<unsigned long long>(rep.seed));
  for (const auto& c : rep.checks)
    std::printf("%-5s %-40s %s\n", !c.asserted ? "INFO" : (c.pass ? "PASS" : "FAIL"), c.name.c_str(), c.detail.c_str());
  for (const auto& w : rep.warnings) std::printf("%-5s %s\n", strict ? "FAIL" : "WARN", w.c_str());
  if (!rep.passed(strict))
    for (const auto& t : rep.tables) {
      if (t.name != "audit") continue;
      std::printf("\nfailing audit rows (%s):\n", t.name.c_str());
      for (const auto& r : t.rows)
        if (r[5] == "false") std::printf("  %s\n", to_csv(Table{"", r, {}}).c_str());
    }
  std::printf("\n");
  for (const auto& [k, v] : rep.timings) std::printf("time  %-20s %.2f s\n", k.c_str(), v);
  for (const auto& a : artifacts) std::printf("wrote %s\n", a.c_str());
  std::printf("\n%s\n", rep.passed(strict) ? "all asserted checks passed" : "asserted checks failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-dependent scattering experiments"};
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool list = false, strict = false;
  app.add_option("--config", config_path, "experiment configuration (JSON)");
  app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_flag("--list", list, "list experiments and exit");
  app.add_flag("--strict", strict, "treat warnings as failures");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    print_list();
    return 0;
  }
  if (config_path.empty()) {
    std::fprintf(stderr, "error: --config is required (or --list)\n");
    return 2;
  }
  try {
    std::ifstream f(config_path);
    if (!f) throw SchemaError("", "cannot open config file " + config_path);
    json cfg;
    try {
      cfg = json::parse(f);
    } catch (const json::parse_error& e) {
      throw SchemaError("", std::string("invalid JSON: ") + e.what());
    }
    RunReport rep = run_experiment(cfg, seed);
    const json out = cfg.contains("output") ? cfg["output"] : json::object();
    std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(out.value("dir", std::string("out"))) / rep.experiment
                                                : std::filesystem::path(out_dir);
    auto artifacts = write_outputs(rep, dir, out.value("svg", false), out.value("snapshots", false), strict);
    print_summary(rep, artifacts, strict);
    return rep.passed(strict) ? 0 : 1;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "config error at \"%s\": %s\n", e.path.c_str(), e.what());
    return 2;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 1;
  } catch (const CapExceeded& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
}
