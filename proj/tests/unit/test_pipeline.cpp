#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bns/feature_store.hpp"
#include "bns/model_io.hpp"
#include "bns/pipeline.hpp"
#include "test_support.hpp"

using namespace bns::pipeline;
using bns::features::Block;

namespace {

// Redirects cout/cerr for the lifetime of one in-process command call.
struct CaptureStreams {
  std::stringstream out;
  std::stringstream err;
  std::streambuf* old_out;
  std::streambuf* old_err;
  CaptureStreams()
      : old_out(std::cout.rdbuf(out.rdbuf())),
        old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~CaptureStreams() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

int run_captured(int (*cmd)(const RunManifest&), const RunManifest& m,
                 std::string* out = nullptr, std::string* err = nullptr) {
  CaptureStreams capture;
  const int rc = cmd(m);
  if (out) *out = capture.out.str();
  if (err) *err = capture.err.str();
  return rc;
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

bool has_summary_key(const std::string& csv, const std::string& key) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return true;
  }
  return false;
}

std::string summary_value(const std::string& csv, const std::string& key) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

}  // namespace

TEST_CASE("parse_mask: names, dedup, canonical order") {
  auto all = parse_mask("all");
  REQUIRE(all.size() == 4);
  CHECK(all[0] == Block::kByteEntropy);
  CHECK(all[3] == Block::kStrings);

  auto one = parse_mask("imports");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Block::kImports);

  // Order is canonical regardless of spelling order; duplicates collapse.
  auto two = parse_mask("strings,imports");
  REQUIRE(two.size() == 2);
  CHECK(two[0] == Block::kImports);
  CHECK(two[1] == Block::kStrings);
  CHECK(parse_mask("imports,imports").size() == 1);
  CHECK(parse_mask("all,imports").size() == 4);

  CHECK_THROWS_AS(parse_mask("entropy"), std::invalid_argument);
  CHECK_THROWS_AS(parse_mask(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_mask(","), std::invalid_argument);
}

TEST_CASE("cmd_extract: matrix shape, sidecar contents, reruns identical") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 4;
  spec.malware = 4;
  spec.discarded = 1;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("out1");
  std::string out;
  CHECK(run_captured(cmd_extract, m, &out) == kExitOk);
  CHECK(out.find("extracted 9 rows (0 skipped)") != std::string::npos);

  auto matrix = bns::feature_store::read_matrix(tmp.str("out1/features.bnsf"));
  CHECK(matrix.rows == 9);
  CHECK(matrix.cols == 1024);

  auto sidecar = bns::feature_store::read_sidecar(tmp.str("out1/features.bnsf.sidecar"));
  REQUIRE(sidecar.size() == 9);
  for (std::size_t i = 0; i < sidecar.size(); ++i) {
    CHECK(sidecar[i].path == corpus.files[i]);
    CHECK(sidecar[i].label == "unlabeled");
  }
  // Extraction records the PE compile timestamp, not the votes timestamp.
  CHECK(sidecar[0].timestamp == 1300000000);
  CHECK(sidecar[4].timestamp == 1350000000);

  // A second run, and a multi-threaded run, produce identical bytes.
  RunManifest again = m;
  again.out_dir = tmp.str("out2");
  CHECK(run_captured(cmd_extract, again) == kExitOk);
  RunManifest threaded = m;
  threaded.out_dir = tmp.str("out3");
  threaded.threads = 3;
  CHECK(run_captured(cmd_extract, threaded) == kExitOk);

  const auto bytes1 = bns::test::read_file(tmp.str("out1/features.bnsf"));
  const auto bytes2 = bns::test::read_file(tmp.str("out2/features.bnsf"));
  const auto bytes3 = bns::test::read_file(tmp.str("out3/features.bnsf"));
  CHECK(bytes1 == bytes2);
  CHECK(bytes1 == bytes3);
}

TEST_CASE("cmd_extract: missing inputs are warned about, none is fatal") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 1;
  spec.malware = 0;
  spec.discarded = 0;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = {corpus.files[0], tmp.str("nope.exe")};
  m.out_dir = tmp.str("out");
  std::string out, err;
  CHECK(run_captured(cmd_extract, m, &out, &err) == kExitOk);
  CHECK(err.find("warning: input not found") != std::string::npos);
  CHECK(out.find("extracted 1 rows") != std::string::npos);

  RunManifest none;
  none.inputs = {tmp.str("missing-dir")};
  none.out_dir = tmp.str("out-none");
  CHECK(run_captured(cmd_extract, none, nullptr, &err) == kExitData);
}

TEST_CASE("cmd_train: model and log artifacts, discarded rows excluded") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 6;
  spec.malware = 6;
  spec.discarded = 2;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  RunManifest t;
  t.matrix_path = tmp.str("features/features.bnsf");
  t.votes_csv = corpus.votes_csv;
  t.out_dir = tmp.str("model");
  t.epochs = 3;
  t.batch_size = 8;
  t.seed = 7;
  std::string out;
  CHECK(run_captured(cmd_train, t, &out) == kExitOk);
  CHECK(out.find("trained on 12 rows (2 discarded, 0 unmatched)") != std::string::npos);

  auto bundle = bns::read_model(tmp.str("model/model.bnsm"));
  REQUIRE(bundle.model.layer_sizes.size() == 4);
  CHECK(bundle.model.layer_sizes[0] == 1024);
  CHECK(bundle.model.layer_sizes[1] == 1024);
  CHECK(bundle.model.layer_sizes[3] == 1);
  CHECK(bundle.mask_blocks.size() == 4);
  CHECK(bundle.seed == 7);
  CHECK(bundle.epochs_run == 3);
  // Calibration gathered the training-set scores, split by label.
  CHECK(bundle.calibration.benign_scores.size() == 6);
  CHECK(bundle.calibration.malware_scores.size() == 6);
  CHECK(bundle.calibration.base_rate == 0.5);

  const std::string log = bns::test::read_text(tmp.str("model/train_log.csv"));
  CHECK(log.rfind("epoch,mean_loss\n", 0) == 0);
  CHECK(count_lines(log) == 4);  // header + 3 epochs
}

TEST_CASE("cmd_train: imports-only mask narrows the input layer to 256") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 4;
  spec.malware = 4;
  spec.discarded = 0;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  RunManifest t;
  t.matrix_path = tmp.str("features/features.bnsf");
  t.votes_csv = corpus.votes_csv;
  t.out_dir = tmp.str("model");
  t.epochs = 2;
  t.batch_size = 8;
  t.mask_blocks = parse_mask("imports");
  CHECK(run_captured(cmd_train, t) == kExitOk);

  auto bundle = bns::read_model(tmp.str("model/model.bnsm"));
  CHECK(bundle.model.layer_sizes[0] == 256);
  REQUIRE(bundle.mask_blocks.size() == 1);
  CHECK(bundle.mask_blocks[0] == Block::kImports);
}

TEST_CASE("cmd_train: single-class corpus is a data error") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 4;
  spec.malware = 0;
  spec.discarded = 0;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  RunManifest t;
  t.matrix_path = tmp.str("features/features.bnsf");
  t.votes_csv = corpus.votes_csv;
  t.out_dir = tmp.str("model");
  t.epochs = 1;
  std::string err;
  CHECK(run_captured(cmd_train, t, nullptr, &err) == kExitData);
  CHECK(err.find("single class") != std::string::npos);
}

TEST_CASE("cmd_train: vote-join warnings for duplicates and unmatched rows") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 2;
  spec.malware = 2;
  spec.discarded = 0;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  // Duplicate one vote row and drop another.
  std::string votes = bns::test::read_text(corpus.votes_csv);
  votes += "b00.exe,0,60,1262304000\n";  // duplicate
  const std::size_t drop = votes.find("b01.exe");
  REQUIRE(drop != std::string::npos);
  votes.erase(drop, votes.find('\n', drop) - drop + 1);
  const std::string edited = tmp.str("edited_votes.csv");
  bns::test::write_text(edited, votes);

  RunManifest t;
  t.matrix_path = tmp.str("features/features.bnsf");
  t.votes_csv = edited;
  t.out_dir = tmp.str("model");
  t.epochs = 1;
  t.batch_size = 4;
  std::string out, err;
  CHECK(run_captured(cmd_train, t, &out, &err) == kExitOk);
  CHECK(err.find("duplicate vote row for b00.exe") != std::string::npos);
  CHECK(err.find("no vote row for b01.exe") != std::string::npos);
  CHECK(out.find("trained on 3 rows (0 discarded, 1 unmatched)") != std::string::npos);
}

TEST_CASE("cmd_train: usage validation") {
  RunManifest t;
  t.matrix_path = "irrelevant.bnsf";
  t.votes_csv = "irrelevant.csv";
  t.epochs = 0;
  CHECK(run_captured(cmd_train, t) == kExitUsage);

  t.epochs = 10;
  t.keep_prob = 1.5;
  CHECK(run_captured(cmd_train, t) == kExitUsage);

  t.keep_prob = 0.8;
  t.bandwidth = 0.0;
  CHECK(run_captured(cmd_train, t) == kExitUsage);

  t.bandwidth = 0.01;
  t.mask_blocks.clear();
  CHECK(run_captured(cmd_train, t) == kExitUsage);

  // With sane options but missing files, it is a data error instead.
  RunManifest missing;
  missing.matrix_path = "no-such.bnsf";
  missing.votes_csv = "no-such.csv";
  CHECK(run_captured(cmd_train, missing) == kExitData);
}

TEST_CASE("cmd_evaluate: kfold artifacts and summary") {
  bns::test::TempDir tmp;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"));  // 12/12/2

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  RunManifest e;
  e.matrix_path = tmp.str("features/features.bnsf");
  e.votes_csv = corpus.votes_csv;
  e.out_dir = tmp.str("eval");
  e.mode = "kfold";
  e.folds = 4;
  e.epochs = 2;
  e.batch_size = 8;
  e.seed = 6;
  e.threads = 2;
  CHECK(run_captured(cmd_evaluate, e) == kExitOk);

  for (int f = 0; f < 4; ++f) {
    const std::string roc = bns::test::read_text(
        tmp.str("eval/roc_fold_" + std::to_string(f) + ".csv"));
    CHECK(roc.rfind("threshold,fpr,tpr\n", 0) == 0);
    CHECK(count_lines(roc) >= 3);
  }
  const std::string mean = bns::test::read_text(tmp.str("eval/roc_mean.csv"));
  CHECK(mean.rfind("fpr,tpr\n", 0) == 0);
  CHECK(count_lines(mean) == 1002);  // header + 1001 grid points

  const std::string summary = bns::test::read_text(tmp.str("eval/summary.csv"));
  CHECK(summary_value(summary, "mode") == "kfold");
  CHECK(summary_value(summary, "rows_used") == "24");
  CHECK(summary_value(summary, "rows_discarded") == "2");
  CHECK(summary_value(summary, "folds") == "4");
  for (int f = 0; f < 4; ++f) {
    CHECK(has_summary_key(summary, "auc_fold_" + std::to_string(f)));
    CHECK(has_summary_key(summary, "tpr_at_0.001_fold_" + std::to_string(f)));
  }
  CHECK(has_summary_key(summary, "auc_mean"));
  CHECK(has_summary_key(summary, "tpr_at_0.001_mean"));
  CHECK(has_summary_key(summary, "auc"));
  CHECK(has_summary_key(summary, "tpr_at_0.001"));

  const double auc = std::stod(summary_value(summary, "auc"));
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);

  // This seed shuffles one fold into a single class: a data error, not an
  // internal one.
  RunManifest unlucky = e;
  unlucky.out_dir = tmp.str("eval-unlucky");
  unlucky.seed = 5;
  std::string err;
  CHECK(run_captured(cmd_evaluate, unlucky, nullptr, &err) == kExitData);
  CHECK(err.find("error: fold") != std::string::npos);
}

TEST_CASE("cmd_evaluate: timesplit artifacts, empty sides, usage errors") {
  bns::test::TempDir tmp;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"));  // 12/12/2

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  RunManifest e;
  e.matrix_path = tmp.str("features/features.bnsf");
  e.votes_csv = corpus.votes_csv;
  e.out_dir = tmp.str("eval");
  e.mode = "timesplit";
  e.epochs = 2;
  e.batch_size = 8;
  e.max_date = "2015-06-01";
  CHECK(run_captured(cmd_evaluate, e) == kExitOk);

  // Corpus timestamps alternate 2010-01-01 / 2015-01-01 around the
  // default 2014-07-31 boundary.
  const std::string summary = bns::test::read_text(tmp.str("eval/summary.csv"));
  CHECK(summary_value(summary, "mode") == "timesplit");
  CHECK(summary_value(summary, "train_rows") == "12");
  CHECK(summary_value(summary, "test_rows") == "12");
  CHECK(summary_value(summary, "dropped_rows") == "0");
  CHECK(has_summary_key(summary, "auc"));
  CHECK(has_summary_key(summary, "tpr_at_0.001"));
  CHECK(bns::test::read_text(tmp.str("eval/roc_timesplit.csv"))
            .rfind("threshold,fpr,tpr\n", 0) == 0);

  // Early boundary pushes everything to the test side: data error.
  RunManifest empty_train = e;
  empty_train.out_dir = tmp.str("eval2");
  empty_train.split_date = "2009-01-01";
  std::string err;
  CHECK(run_captured(cmd_evaluate, empty_train, nullptr, &err) == kExitData);
  CHECK(err.find("empty side") != std::string::npos);

  // Usage errors.
  RunManifest bad_mode = e;
  bad_mode.mode = "holdout";
  CHECK(run_captured(cmd_evaluate, bad_mode) == kExitUsage);

  RunManifest bad_date = e;
  bad_date.split_date = "2014-7-31";
  CHECK(run_captured(cmd_evaluate, bad_date) == kExitUsage);

  RunManifest bad_folds = e;
  bad_folds.mode = "kfold";
  bad_folds.folds = 1;
  CHECK(run_captured(cmd_evaluate, bad_folds) == kExitUsage);
}

TEST_CASE("cmd_score: scores.csv, base-rate warning, corrupt model") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 4;
  spec.malware = 4;
  spec.discarded = 0;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  RunManifest m;
  m.inputs = corpus.files;
  m.out_dir = tmp.str("features");
  REQUIRE(run_captured(cmd_extract, m) == kExitOk);

  RunManifest t;
  t.matrix_path = tmp.str("features/features.bnsf");
  t.votes_csv = corpus.votes_csv;
  t.out_dir = tmp.str("model");
  t.epochs = 2;
  t.batch_size = 8;
  REQUIRE(run_captured(cmd_train, t) == kExitOk);

  RunManifest s;
  s.model_path = tmp.str("model/model.bnsm");
  s.inputs = {corpus.files[0], corpus.files[4]};
  s.out_dir = tmp.str("scores");
  std::string err;
  CHECK(run_captured(cmd_score, s, nullptr, &err) == kExitOk);
  CHECK(err.find("warning: no --base-rate given, using default 0.5") !=
        std::string::npos);

  const std::string scores = bns::test::read_text(tmp.str("scores/scores.csv"));
  CHECK(scores.rfind("file_id,raw_score,threat_score\n", 0) == 0);
  CHECK(count_lines(scores) == 3);
  CHECK(scores.find("b00.exe,") != std::string::npos);
  CHECK(scores.find("m00.exe,") != std::string::npos);

  // Scores are probabilities.
  std::istringstream rows(scores.substr(scores.find('\n') + 1));
  std::string line;
  while (std::getline(rows, line)) {
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    const double raw = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    const double threat = std::stod(line.substr(c2 + 1));
    CHECK(raw >= 0.0);
    CHECK(raw <= 1.0);
    CHECK(threat >= 0.0);
    CHECK(threat <= 1.0);
  }

  // With an explicit base rate there is no warning.
  RunManifest with_rate = s;
  with_rate.base_rate = 0.1;
  with_rate.out_dir = tmp.str("scores2");
  CHECK(run_captured(cmd_score, with_rate, nullptr, &err) == kExitOk);
  CHECK(err.find("warning: no --base-rate") == std::string::npos);

  // Corrupt model file: data error.
  const std::string broken = tmp.str("broken.bnsm");
  bns::test::write_text(broken, "junk\n");
  RunManifest bad = s;
  bad.model_path = broken;
  CHECK(run_captured(cmd_score, bad, nullptr, &err) == kExitData);
}

TEST_CASE("cli: usage exit codes and help") {
  bns::test::TempDir tmp;
  auto help = bns::test::run_cli("--help", tmp.str());
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("extract") != std::string::npos);
  CHECK(help.out.find("score") != std::string::npos);

  CHECK(bns::test::run_cli("", tmp.str()).exit_code == 1);
  CHECK(bns::test::run_cli("extract", tmp.str()).exit_code == 1);
  CHECK(bns::test::run_cli("train", tmp.str()).exit_code == 1);
  CHECK(bns::test::run_cli("frobnicate", tmp.str()).exit_code == 1);
  CHECK(bns::test::run_cli("extract --bogus-flag x.exe", tmp.str()).exit_code == 1);

  // Unknown mask name is a usage error after parse.
  auto mask = bns::test::run_cli(
      "train --matrix m.bnsf --votes v.csv --mask entropy", tmp.str());
  CHECK(mask.exit_code == 1);
  CHECK(mask.err.find("unknown feature block") != std::string::npos);

  // Missing data files with valid usage: exit 2.
  auto missing = bns::test::run_cli(
      "train --matrix no-such.bnsf --votes no-such.csv", tmp.str());
  CHECK(missing.exit_code == 2);
}

TEST_CASE("cli: extract, train, score round trip") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 4;
  spec.malware = 4;
  spec.discarded = 1;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  std::string file_args;
  for (const auto& f : corpus.files) file_args += " " + f;

  auto extract = bns::test::run_cli(
      "extract" + file_args + " --out " + tmp.str("features"), tmp.str());
  CHECK(extract.exit_code == 0);
  CHECK(extract.out.find("extracted 9 rows") != std::string::npos);

  auto train = bns::test::run_cli(
      "train --matrix " + tmp.str("features/features.bnsf") + " --votes " +
          corpus.votes_csv + " --out " + tmp.str("model") +
          " --epochs 2 --batch-size 8 --seed 3",
      tmp.str());
  CHECK(train.exit_code == 0);
  CHECK(train.out.find("trained on 8 rows") != std::string::npos);

  auto score = bns::test::run_cli(
      "score --model " + tmp.str("model/model.bnsm") + " --base-rate 0.3 " +
          corpus.files[0] + " " + corpus.files[4] + " --out " + tmp.str("scores"),
      tmp.str());
  CHECK(score.exit_code == 0);
  CHECK(score.err.find("warning") == std::string::npos);
  const std::string scores = bns::test::read_text(tmp.str("scores/scores.csv"));
  CHECK(count_lines(scores) == 3);
}

TEST_CASE("cli: config file supplies options, flags win over it") {
  bns::test::TempDir tmp;
  bns::test::CorpusSpec spec;
  spec.benign = 4;
  spec.malware = 4;
  spec.discarded = 0;
  auto corpus = bns::test::make_corpus(tmp.str("corpus"), spec);

  std::string file_args;
  for (const auto& f : corpus.files) file_args += " " + f;
  REQUIRE(bns::test::run_cli(
              "extract" + file_args + " --out " + tmp.str("features"),
              tmp.str())
              .exit_code == 0);

  const std::string config = tmp.str("run.ini");
  bns::test::write_text(config,
                        "[train]\n"
                        "epochs=5\n"
                        "batch-size=8\n");

  // Config alone: five epochs.
  auto from_config = bns::test::run_cli(
      "--config " + config + " train --matrix " +
          tmp.str("features/features.bnsf") + " --votes " + corpus.votes_csv +
          " --out " + tmp.str("model1"),
      tmp.str());
  CHECK(from_config.exit_code == 0);
  const std::string log1 = bns::test::read_text(tmp.str("model1/train_log.csv"));
  CHECK(count_lines(log1) == 6);  // header + 5 epochs

  // Explicit flag beats the config value.
  auto flag_wins = bns::test::run_cli(
      "--config " + config + " train --matrix " +
          tmp.str("features/features.bnsf") + " --votes " + corpus.votes_csv +
          " --out " + tmp.str("model2") + " --epochs 2",
      tmp.str());
  CHECK(flag_wins.exit_code == 0);
  const std::string log2 = bns::test::read_text(tmp.str("model2/train_log.csv"));
  CHECK(count_lines(log2) == 3);  // header + 2 epochs
}
