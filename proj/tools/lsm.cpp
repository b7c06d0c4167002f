#include "lsm/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string observations;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "config file (TOML-style sections)");
  sub->add_option("--out", flags.out_dir, "output directory");
  sub->add_option("--seed", flags.seed, "base seed (overrides the config)");
  sub->add_option("--threads", flags.threads, "worker pool cap");
}

int load_and_run(const CommonFlags& flags, int (*command)(const lsm::RunConfig&)) {
  lsm::RunConfig config;
  try {
    config = flags.config_path.empty() ? lsm::RunConfig::defaults()
                                       : lsm::load_config_file(flags.config_path);
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.seed) config.seed = *flags.seed;
    if (flags.threads) config.threads = *flags.threads;
    if (!flags.observations.empty()) config.observations = flags.observations;
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return lsm::kExitConfig;
  }
  return command(config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parameter estimation for fast-slow SDEs with alpha-stable noise via random slow manifolds"};
  app.require_subcommand(1);

  CommonFlags simulate_flags, reduce_flags, estimate_flags, validate_flags;
  CLI::App* simulate = app.add_subcommand("simulate", "integrate full-system sample paths to CSV");
  add_common(simulate, simulate_flags);
  CLI::App* reduce = app.add_subcommand("reduce", "manifold cross-section and full-vs-reduced comparison");
  add_common(reduce, reduce_flags);
  CLI::App* estimate = app.add_subcommand("estimate", "run the p-moment Nelder-Mead estimation");
  add_common(estimate, estimate_flags);
  estimate->add_option("--obs", estimate_flags.observations,
                       "directory of observation CSVs (default: synthesize at lambda0)");
  CLI::App* validate = app.add_subcommand("validate", "sampler/hypothesis/manifold validation suite");
  add_common(validate, validate_flags);

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed()) return load_and_run(simulate_flags, lsm::cmd_simulate);
  if (reduce->parsed()) return load_and_run(reduce_flags, lsm::cmd_reduce);
  if (estimate->parsed()) return load_and_run(estimate_flags, lsm::cmd_estimate);
  if (validate->parsed()) return load_and_run(validate_flags, lsm::cmd_validate);
  return lsm::kExitConfig;
}
