#include <CLI11.hpp>

#include "acflow/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"entropy-regularised actor-critic flow laboratory"};
  app.require_subcommand(1);

  std::string config_path, spec_path, mdp_out;
  std::string out_dir_value;
  bool out_dir_set = false;
  int threads = 0;
  std::uint64_t seed_value = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out-dir", out_dir_value,
                    "override the config's output directory")
        ->each([&](const std::string&) { out_dir_set = true; });
    cmd->add_option("--threads", threads, "OpenMP thread count (0 = default)");
    cmd->add_option("--seed-override", seed_value,
                    "replace the generator seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", config_path, "experiment config JSON")->required();
  add_common(run);

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
  sweep->add_option("config", config_path, "sweep config JSON")->required();
  add_common(sweep);

  CLI::App* validate =
      app.add_subcommand("validate", "parse and resolve a config, no run");
  validate->add_option("config", config_path, "experiment config JSON")
      ->required();

  CLI::App* gen = app.add_subcommand("gen-mdp", "sample an MDP description");
  gen->add_option("spec", spec_path, "generator spec JSON")->required();
  gen->add_option("-o,--output", mdp_out, "output MDP JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  const std::optional<std::string> out_dir =
      out_dir_set ? std::optional<std::string>(out_dir_value) : std::nullopt;
  const std::optional<std::uint64_t> seed_override =
      seed_set ? std::optional<std::uint64_t>(seed_value) : std::nullopt;

  if (run->parsed())
    return acflow::run_command(config_path, out_dir, threads, seed_override);
  if (sweep->parsed())
    return acflow::sweep_command(config_path, out_dir, threads, seed_override);
  if (validate->parsed()) return acflow::validate_command(config_path);
  if (gen->parsed()) return acflow::gen_mdp_command(spec_path, mdp_out);
  return acflow::kExitConfig;
}
