// saarn gen-data | train | eval | ablate

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "saarn/harness/commands.hpp"

using namespace saarn;

namespace {

harness::RunConfig resolve(const std::string& path, std::optional<std::uint64_t> seed,
                           std::optional<std::string> out) {
  auto cfg = path.empty() ? harness::RunConfig{} : harness::load_run_config(path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output_dir = *out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Referring segmentation for low-altitude drone imagery"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, split = "val";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the root seed");
    sub->add_option("--out", out, "override the output directory");
  };
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  auto* ablate = app.add_subcommand("ablate", "CDLE/ARFM and linguistic-component ablations");
  add_common(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : harness::kExitConfig;
  }

  try {
    if (eval->parsed()) {
      harness::EvalRequest req;
      req.checkpoint = checkpoint;
      req.split = dataset::parse_split(split);
      if (!config_path.empty()) req.dataset_dir = resolve(config_path, seed, std::nullopt).dataset_path().string();
      req.out_dir = out;
      return harness::cmd_eval(req, std::cout, std::cerr);
    }
    const auto cfg = resolve(config_path, seed, out);
    if (gen->parsed()) return harness::cmd_gen_data(cfg, std::cout, std::cerr);
    if (train->parsed()) return harness::cmd_train(cfg, std::cout, std::cerr);
    if (ablate->parsed()) return harness::cmd_ablate(cfg, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return harness::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return harness::kExitFailure;
  }
  return harness::kExitFailure;
}
