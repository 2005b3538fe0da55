#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bns/pipeline.hpp"

namespace {

void add_training_flags(CLI::App* cmd, bns::pipeline::RunManifest& m,
                        std::string& mask_text) {
  cmd->add_option("--seed", m.seed, "Run seed; all randomness derives from it");
  cmd->add_option("--mask", mask_text,
                  "Feature blocks to use: comma-separated subset of "
                  "byte-entropy,imports,metadata,strings, or 'all'");
  cmd->add_option("--epochs", m.epochs, "Maximum training epochs");
  cmd->add_option("--batch-size", m.batch_size, "Minibatch size");
  cmd->add_option("--keep-prob", m.keep_prob, "Dropout keep probability in (0,1]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static PE malware detection pipeline"};
  app.set_config("--config", "", "Read options from an INI/TOML file (flags win)");
  app.require_subcommand(1);

  bns::pipeline::RunManifest manifest;
  std::string mask_text = "all";

  CLI::App* extract = app.add_subcommand("extract", "Extract feature matrices from PE files");
  extract->add_option("inputs", manifest.inputs, "Input files or directories")->required();
  extract->add_option("--out", manifest.out_dir, "Output directory");
  extract->add_option("--threads", manifest.threads, "Extraction worker threads");
  extract->add_option("--seed", manifest.seed, "Run seed (recorded for provenance)");

  CLI::App* train = app.add_subcommand("train", "Train a model from an extracted matrix");
  train->add_option("--matrix", manifest.matrix_path, "features.bnsf from extract")->required();
  train->add_option("--votes", manifest.votes_csv, "Votes CSV with labels")->required();
  train->add_option("--out", manifest.out_dir, "Output directory");
  add_training_flags(train, manifest, mask_text);
  train->add_option("--base-rate", manifest.base_rate, "Prior malware base rate stored with the model");
  train->add_option("--bandwidth", manifest.bandwidth, "Calibration KDE bandwidth");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Cross-validated or time-split evaluation");
  evaluate->add_option("--matrix", manifest.matrix_path, "features.bnsf from extract")->required();
  evaluate->add_option("--votes", manifest.votes_csv, "Votes CSV with labels")->required();
  evaluate->add_option("--out", manifest.out_dir, "Output directory");
  evaluate->add_option("--mode", manifest.mode, "kfold or timesplit");
  evaluate->add_option("--folds", manifest.folds, "Fold count for kfold mode");
  evaluate->add_option("--split-date", manifest.split_date, "Timesplit boundary (YYYY-MM-DD, test side)");
  evaluate->add_option("--min-date", manifest.min_date, "Timesplit minimum date; earlier rows dropped");
  evaluate->add_option("--max-date", manifest.max_date, "Timesplit maximum date; later rows dropped");
  evaluate->add_option("--threads", manifest.threads, "Parallel fold workers");
  add_training_flags(evaluate, manifest, mask_text);

  CLI::App* score = app.add_subcommand("score", "Score files with a trained model");
  score->add_option("--model", manifest.model_path, "model.bnsm from train")->required();
  score->add_option("inputs", manifest.inputs, "Files or directories to score")->required();
  score->add_option("--out", manifest.out_dir, "Output directory");
  score->add_option("--base-rate", manifest.base_rate, "Prior malware base rate for threat scores");
  score->add_option("--threads", manifest.threads, "Extraction worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bns::pipeline::kExitUsage;
  }

  if (*train || *evaluate) {
    try {
      manifest.mask_blocks = bns::pipeline::parse_mask(mask_text);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return bns::pipeline::kExitUsage;
    }
  }

  if (*extract) return bns::pipeline::cmd_extract(manifest);
  if (*train) return bns::pipeline::cmd_train(manifest);
  if (*evaluate) return bns::pipeline::cmd_evaluate(manifest);
  if (*score) return bns::pipeline::cmd_score(manifest);
  return bns::pipeline::kExitUsage;
}
