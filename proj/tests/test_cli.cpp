#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "sct/cli.hpp"
#include "sct/checkpoint.hpp"
#include "sct/volume_io.hpp"
#include "test_util.hpp"

using namespace sct;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

std::vector<std::string> tiny_train_flags(const fs::path& data, const fs::path& run) {
  return {"train", "--data-dir", data.string(), "--run-dir", run.string(), "--epochs", "2",
          "--samples-per-volume", "2", "--batch-size", "2", "--depth", "2", "--base-width", "4",
          "--seed", "3", "--split-ratio", "0.5"};
}

} // namespace

TEST_CASE("run config parsing") {
  const auto base = cli::default_run_config();
  const auto c = cli::parse_run_config("# comment\n\nepochs = 7\n  seed=11  \n", base);
  CHECK(c.at("epochs") == "7");
  CHECK(c.at("seed") == "11");
  CHECK(c.at("slices") == base.at("slices"));
  CHECK_ERROR_CODE(cli::parse_run_config("epoch = 7\n", base), ErrorCode::UnknownKey);
  CHECK(cli::parse_run_config(cli::format_run_config(c), base) == c);
  const auto tc = cli::train_config_from(c);
  CHECK(tc.epochs == 7);
  CHECK_FALSE(tc.lr0.has_value());
  auto explicit_lr = c;
  explicit_lr["lr0"] = "0.002";
  CHECK(cli::train_config_from(explicit_lr).lr0 == 0.002);
  CHECK(cli::model_spec_from(c).in_channels == tc.slices);
}

TEST_CASE("usage errors and help") {
  CHECK(run_cli({}).code == cli::kUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(run_cli({"--help"}).code == cli::kOk);
  CHECK(run_cli({"phantom"}).code == cli::kUsage);
}

TEST_CASE("train with an unknown config key exits 3 and creates nothing") {
  test::TempDir tmp("cli_unknown");
  write_text(tmp.path() / "run.cfg", "epochs = 1\nlearning_rate = 0.1\n");
  const auto run_dir = tmp.path() / "run";
  const auto r = run_cli({"train", "--config", (tmp.path() / "run.cfg").string(), "--run-dir", run_dir.string(),
                          "--data-dir", tmp.path().string()});
  CHECK(r.code == cli::kUnknownKey);
  CHECK(r.err.find("learning_rate") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  CHECK_FALSE(fs::exists(run_dir));
}

TEST_CASE("missing paths exit 4") {
  test::TempDir tmp("cli_missing");
  const auto r = run_cli({"train", "--data-dir", (tmp.path() / "nope").string(), "--run-dir",
                          (tmp.path() / "run").string()});
  CHECK(r.code == cli::kMissingPath);
  CHECK_FALSE(fs::exists(tmp.path() / "run"));
  CHECK(run_cli({"predict", "--checkpoint", (tmp.path() / "x.ckpt").string(), "--input", "a.mha", "--output",
                 "b.mha"})
            .code == cli::kMissingPath);
  CHECK(run_cli({"evaluate", "--pred-dir", (tmp.path() / "p").string(), "--gt-dir", tmp.path().string(), "--out",
                 (tmp.path() / "r.csv").string()})
            .code == cli::kMissingPath);
}

TEST_CASE("invalid values exit 1 before any run directory exists") {
  test::TempDir tmp("cli_invalid");
  const auto r = run_cli({"train", "--data-dir", tmp.path().string(), "--run-dir", (tmp.path() / "run").string(),
                          "--slices", "4"});
  CHECK(r.code == cli::kFailure);
  CHECK_FALSE(fs::exists(tmp.path() / "run"));
}

TEST_CASE("phantom, split, train, predict and evaluate") {
  test::TempDir tmp("cli_flow");
  const auto data = tmp.path() / "data";
  REQUIRE(run_cli({"phantom", "--out", data.string(), "--count", "4", "--seed", "2", "--nx", "16", "--ny", "16",
                   "--nz", "3"})
              .code == cli::kOk);
  CHECK(discover_cases(data).size() == 4);

  const auto split_file = tmp.path() / "split.txt";
  REQUIRE(run_cli({"split", "--data-dir", data.string(), "--out", split_file.string(), "--ratio", "0.5", "--seed",
                   "3"})
              .code == cli::kOk);
  const auto split_text = slurp(split_file);
  CHECK(split_text.find("train = ") != std::string::npos);
  CHECK(split_text.find("val = ") != std::string::npos);

  const auto run = tmp.path() / "run";
  auto flags = tiny_train_flags(data, run);
  flags.insert(flags.end(), {"--split", split_file.string()});
  const auto t = run_cli(flags);
  INFO(t.err);
  REQUIRE(t.code == cli::kOk);
  for (const char* f : {"config", "split.txt", "history.csv", "best.ckpt", "last.ckpt"}) CHECK(fs::exists(run / f));
  CHECK(slurp(run / "split.txt") == split_text);
  const auto snapshot = cli::parse_run_config(slurp(run / "config"), cli::default_run_config());
  CHECK(snapshot.at("epochs") == "2");
  CHECK(snapshot.at("split") == split_file.string());

  const auto one = run_cli({"predict", "--checkpoint", (run / "best.ckpt").string(), "--input",
                            (data / "case_000_source.mha").string(), "--mask", (data / "case_000_mask.mha").string(),
                            "--output", (tmp.path() / "one_sct.mha").string()});
  CHECK(one.code == cli::kOk);
  const Volume sct = load_mha(tmp.path() / "one_sct.mha", Unit::HU);
  CHECK(sct.dims() == Dims{16, 16, 3});

  const auto preds = tmp.path() / "preds";
  REQUIRE(run_cli({"predict", "--checkpoint", (run / "best.ckpt").string(), "--case-dir", data.string(),
                   "--out-dir", preds.string()})
              .code == cli::kOk);
  CHECK(fs::exists(preds / "predict_manifest.json"));
  const auto report = tmp.path() / "report.csv";
  const auto e = run_cli({"evaluate", "--pred-dir", preds.string(), "--gt-dir", data.string(), "--out",
                          report.string(), "--psnr-range", "fixed:4095", "--verbose"});
  CHECK(e.code == cli::kOk);
  const auto csv = slurp(report);
  CHECK(csv.rfind("case_id,mae,psnr,ssim\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(csv.find("mean ± std (n=4)") != std::string::npos);
}

TEST_CASE("evaluate on identical directories reports zero MAE") {
  test::TempDir tmp("cli_eval");
  const auto data = tmp.path() / "data";
  REQUIRE(run_cli({"phantom", "--out", data.string(), "--count", "3", "--nx", "16", "--ny", "16", "--nz", "2"})
              .code == cli::kOk);
  const auto report = tmp.path() / "report.csv";
  REQUIRE(run_cli({"evaluate", "--pred-dir", data.string(), "--gt-dir", data.string(), "--out", report.string()})
              .code == cli::kOk);
  std::istringstream in(slurp(report));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("mean", 0) == 0) continue;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    CHECK(line.substr(first + 1, second - first - 1) == "0");
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("two identical train invocations write identical artifacts") {
  test::TempDir tmp("cli_repro");
  const auto data = tmp.path() / "data";
  REQUIRE(run_cli({"phantom", "--out", data.string(), "--count", "2", "--nx", "16", "--ny", "16", "--nz", "3"})
              .code == cli::kOk);
  REQUIRE(run_cli(tiny_train_flags(data, tmp.path() / "a")).code == cli::kOk);
  REQUIRE(run_cli(tiny_train_flags(data, tmp.path() / "b")).code == cli::kOk);
  for (const char* f : {"history.csv", "best.ckpt", "last.ckpt", "split.txt"})
    CHECK(read_file(tmp.path() / "a" / f) == read_file(tmp.path() / "b" / f));
}
