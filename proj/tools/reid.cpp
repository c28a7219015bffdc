// Command-line front end: gen | train | eval | ablate.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "reid/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Clustering-based unsupervised re-identification on feature vectors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", REID_VERSION);

  reid::CommandOptions opt;
  std::string mode;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Top-level seed (overrides the config)");
    sub->add_option("--mode", mode, "Distance mode override")->check(CLI::IsMember({"direct", "softmax"}));
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--config", opt.config, "JSON config")->required();
  gen->add_option("--out", opt.out, "Output directory")->required();
  add_common(gen);

  auto* train = app.add_subcommand("train", "Train an encoder on a dataset directory");
  train->add_option("--config", opt.config, "JSON config")->required();
  train->add_option("--data", opt.data, "Dataset directory")->required();
  train->add_option("--out", opt.out, "Output directory")->required();
  train->add_flag("--timing", opt.timing, "Record wall time in the epoch CSV");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's query/gallery splits");
  eval->add_option("--checkpoint", opt.checkpoint, "checkpoint.json written by train")->required();
  eval->add_option("--data", opt.data, "Dataset directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid and/or sweep");
  ablate->add_option("--config", opt.config, "JSON config")->required();
  ablate->add_option("--out", opt.out, "Output directory")->required();
  ablate->add_option("--data", opt.data, "Fixed dataset directory instead of generating per seed");
  add_common(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (auto* sub : {gen, train, ablate}) {
    if (sub->parsed() && sub->count("--seed")) opt.seed = seed;
  }
  if (!mode.empty()) opt.mode = reid::parse_distance_mode(mode);

  try {
    if (gen->parsed()) return reid::cmd_gen(opt);
    if (train->parsed()) return reid::cmd_train(opt);
    if (eval->parsed()) return reid::cmd_eval(opt);
    if (ablate->parsed()) return reid::cmd_ablate(opt);
  } catch (const reid::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.is_user_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 1;
}
