#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ndhmc/harness.hpp"

namespace {

struct CommonFlags {
  std::string manifest;
  std::string out_dir = ".";
  std::size_t workers = 0;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--manifest", flags.manifest, "JSON manifest (defaults apply when omitted)")
      ->check(CLI::ExistingFile);
  sub->add_option("--out-dir", flags.out_dir, "Directory for CSV and JSON outputs");
  sub->add_option("--workers", flags.workers, "Worker threads (0 = all cores)");
  sub->add_option("--seed", flags.seed, "Master seed; overrides the manifest");
}

int run(ndhmc::ExperimentKind kind, const CommonFlags& flags) {
  ndhmc::ExperimentManifest manifest =
      flags.manifest.empty() ? ndhmc::ExperimentManifest::defaults_for(kind)
                             : ndhmc::load_manifest(flags.manifest, kind);
  if (flags.seed) manifest.seed = *flags.seed;
  std::size_t workers = flags.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t failed = ndhmc::run_experiment(manifest, flags.out_dir, workers, std::cerr);
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leapfrog HMC experiments on Bayesian MLPs and kinked proxy targets"};
  app.require_subcommand(1);

  const std::pair<const char*, const char*> commands[] = {
      {"generate-data", "Write the synthetic cos(2x) regression data set"},
      {"run-grid", "Acceptance rates over an (activation, L, eps) grid"},
      {"efficiency-sweep", "Acceptance and eps * acceptance at fixed travel time"},
      {"dim-sweep", "Acceptance across network widths and depths"},
      {"error-order", "Local or global energy-error order fits"},
      {"crossing-stats", "Distribution of kink-crossing times within a step"},
      {"proxy-scaling", "Acceptance of a product Laplace target as d grows"},
      {"tuning-curves", "Limiting acceptance and efficiency curves"},
  };

  CommonFlags flags;
  std::optional<ndhmc::ExperimentKind> chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, flags);
    const ndhmc::ExperimentKind kind = ndhmc::parse_experiment_kind(name);
    sub->callback([&chosen, kind] { chosen = kind; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return run(*chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
