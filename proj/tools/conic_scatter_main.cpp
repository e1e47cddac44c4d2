#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "conic_scatter/config.hpp"
#include "conic_scatter/errors.hpp"
#include "conic_scatter/run.hpp"

namespace cs = conic_scatter;

namespace {

void print_checks(const cs::RunManifest& m) {
  for (const auto& c : m.checks) {
    std::printf("%-28s %s  value=%s limit=%s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                cs::format_double(c.value).c_str(), cs::format_double(c.limit).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classical and semiclassical scattering on conic ends"};
  std::string experiment, config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("experiment", experiment, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(cs::experiment_names()));
  app.add_option("--config", config_path, "JSON configuration file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides config.output)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for test-point draws (overrides config.seed)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    auto config = cs::load_config(config_path, experiment);
    if (*out_opt) config.output = out_dir;
    if (*seed_opt) config.seed = seed;
    const auto manifest = cs::run(config);
    const auto files = cs::emit_tables(manifest, config.output);
    print_checks(manifest);
    std::printf("wrote %zu files to %s\n", files.size(), config.output.c_str());
    return manifest.all_passed() ? 0 : 2;
  } catch (const cs::Error& e) {
    std::fprintf(stderr, "conic-scatter: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "conic-scatter: unexpected failure: %s\n", e.what());
    return 1;
  }
}
