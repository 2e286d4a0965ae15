// abuse-pipeline <subcommand> --config <path> [--output-dir <path>] [--seed <u64>]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "abuse/abuse.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multilingual abusive-comment detection pipeline"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "overrides output_dir from the config");
    sub->add_option("--seed", seed, "overrides seed from the config");
  };
  add_common(app.add_subcommand("ingest", "load, clean and transliterate corpora; write counts"));
  add_common(app.add_subcommand("train", "run every enabled stage and save the model"));
  add_common(app.add_subcommand("predict", "score the test corpus with a saved model"));
  add_common(app.add_subcommand("diagnose", "label-noise probe and label-flip check"));
  add_common(app.add_subcommand("plot", "2-D PCA scatter of the training embeddings"));
  add_common(app.add_subcommand("synth", "write a synthetic corpus, embeddings and flip list"));

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  abuse::RunConfig config;
  try {
    config = abuse::parse_config(config_path);
  } catch (const abuse::Error& error) {
    std::cerr << "abuse-pipeline: stage 'config' failed: " << error.what() << '\n';
    return 1;
  }
  if (!output_dir.empty()) config.output_dir = output_dir;
  if (seed) config.seed = *seed;
  return abuse::run(subcommand, config);
}
