#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "analogy/cli.hpp"
#include "analogy/rpm_io.hpp"

namespace analogy::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("analogy_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

const std::vector<std::string> kSmall{"--embed-dim", "12", "--latent-dim", "8", "--quiet"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

TEST(Generate, ZeroCountWritesEmptyValidFile) {
  const auto dir = temp_dir("gen0");
  const auto r = call({"generate", "--count", "0", "--out", (dir / "c.jsonl").string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_TRUE(rpm::load_corpus(dir / "c.jsonl").empty());
  EXPECT_EQ(call({"eval", "--data", (dir / "c.jsonl").string(), "--validate-only"}).code, kOk);
}

TEST(Generate, SameSeedGivesIdenticalFiles) {
  const auto dir = temp_dir("gen_det");
  for (const char* f : {"a.jsonl", "b.jsonl"}) {
    ASSERT_EQ(call({"generate", "--seed", "12345", "--count", "100", "--out", (dir / f).string()})
                  .code,
              kOk);
  }
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
}

TEST(Generate, OutputPassesValidation) {
  const auto dir = temp_dir("gen_valid");
  const auto path = (dir / "g.jsonl").string();
  const auto g = call({"generate", "--config", "grid2", "--count", "60", "--out", path});
  ASSERT_EQ(g.code, kOk);
  EXPECT_NE(g.out.find("task signatures"), std::string::npos);
  const auto v = call({"eval", "--data", path, "--validate-only"});
  EXPECT_EQ(v.code, kOk);
  EXPECT_NE(v.out.find("valid 60 / 60"), std::string::npos);
}

TEST(Generate, RasterAndShapes) {
  const auto dir = temp_dir("gen_raster");
  const auto path = dir / "r.jsonl";
  ASSERT_EQ(call({"generate", "--count", "3", "--raster", "12x10", "--shapes", "circle,square",
                  "--out", path.string()})
                .code,
            kOk);
  for (const auto& p : rpm::load_corpus(path)) {
    ASSERT_TRUE(p.context[0].raster);
    EXPECT_EQ(p.context[0].raster->height, 12);
    EXPECT_EQ(p.context[0].raster->width, 10);
    for (int s : rpm::shapes_used(p)) EXPECT_TRUE(s == rpm::circle || s == rpm::square);
  }
}

TEST(Usage, BadInvocationsExitWithUsageCode) {
  EXPECT_EQ(call({}).code, kUsage);
  EXPECT_EQ(call({"frobnicate"}).code, kUsage);
  EXPECT_EQ(call({"generate", "--count", "1", "--out", "x", "--bogus"}).code, kUsage);
  EXPECT_EQ(call({"train", "--mode", "nope", "--data", "x", "--out", "y"}).code, kUsage);
  EXPECT_EQ(call({"train", "--data", "x", "--out", "y", "--preset-subsample", "50"}).code, kUsage);
  EXPECT_EQ(call({"generate", "--count", "1", "--out", "x", "--raster", "20"}).code, kUsage);
}

TEST(Usage, MissingOrCorruptDataExitsWithDataCode) {
  const auto dir = temp_dir("data_err");
  EXPECT_EQ(call({"eval", "--data", (dir / "none.jsonl").string(), "--validate-only"}).code,
            kDataError);
  std::ofstream(dir / "bad.jsonl") << "{\"not\": \"a problem\"}\n";
  const auto r = call({"train", "--data", (dir / "bad.jsonl").string(), "--out",
                       (dir / "run").string()});
  EXPECT_EQ(r.code, kDataError);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
}

class TrainCli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = temp_dir("train");
    data_ = (dir_ / "corpus.jsonl").string();
    ASSERT_EQ(call({"generate", "--count", "200", "--out", data_}).code, kOk);
  }
  static fs::path dir_;
  static std::string data_;
};

fs::path TrainCli::dir_;
std::string TrainCli::data_;

TEST_F(TrainCli, ZeroEpochsReportsTestAccuracy) {
  const auto out = dir_ / "e0";
  const auto r = call(with_small({"train", "--mode", "baseline", "--data", data_, "--epochs", "0",
                                  "--out", out.string()}));
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("resolved config: "), std::string::npos);
  EXPECT_NE(r.out.find("test accuracy"), std::string::npos);
  const auto m = manifest(out);
  EXPECT_EQ(m.at("steps"), 0);
  EXPECT_TRUE(m.at("test_accuracy").is_number());
  EXPECT_EQ(m.at("data").at("train").at("count"), 120);
  EXPECT_EQ(m.at("data").at("val").at("count"), 40);
  EXPECT_EQ(m.at("data").at("test").at("count"), 40);
}

TEST_F(TrainCli, PresetSubsampleSetsTrainingSize) {
  const auto out = dir_ / "p77";
  ASSERT_EQ(call(with_small({"train", "--data", data_, "--epochs", "1", "--preset-subsample", "77",
                             "--out", out.string()}))
                .code,
            kOk);
  EXPECT_EQ(manifest(out).at("data").at("train").at("count"), 77);
  EXPECT_EQ(rpm::load_corpus(out / "data" / "train.jsonl").size(), 77u);
}

TEST_F(TrainCli, CrossShapesRecordsShapeSplit) {
  const auto out = dir_ / "cross";
  const auto a = dir_ / "train_shapes.jsonl", b = dir_ / "eval_shapes.jsonl";
  ASSERT_EQ(call({"generate", "--count", "60", "--shapes", "triangle,square,hexagon", "--out",
                  a.string()})
                .code,
            kOk);
  ASSERT_EQ(call({"generate", "--count", "40", "--shapes", "pentagon,circle", "--first-index",
                  "60", "--out", b.string()})
                .code,
            kOk);
  // A full-domain problem mixes shapes and is dropped.
  ASSERT_EQ(call({"generate", "--count", "5", "--first-index", "100", "--out",
                  (dir_ / "mixed.jsonl").string()})
                .code,
            kOk);
  const auto both = dir_ / "cross.jsonl";
  std::ofstream(both) << slurp(a) << slurp(b) << slurp(dir_ / "mixed.jsonl");
  ASSERT_EQ(call(with_small({"train", "--data", both.string(), "--epochs", "1", "--cross-shapes",
                             "--out", out.string()}))
                .code,
            kOk);
  EXPECT_EQ(manifest(out).at("data").at("train").at("count"), 60);
  EXPECT_EQ(manifest(out).at("data").at("val").at("count"), 20);
  EXPECT_EQ(manifest(out).at("data").at("test").at("count"), 20);
  const auto split = manifest(out).at("data").at("split");
  EXPECT_EQ(split.at("train_shapes"), nlohmann::json({"triangle", "square", "hexagon"}));
  EXPECT_EQ(split.at("eval_shapes"), nlohmann::json({"pentagon", "circle"}));
  for (const auto& p : rpm::load_corpus(out / "data" / "train.jsonl")) {
    for (int s : rpm::shapes_used(p)) EXPECT_TRUE(s == rpm::triangle || s == rpm::square || s == rpm::hexagon);
  }
  for (const char* f : {"val.jsonl", "test.jsonl"}) {
    for (const auto& p : rpm::load_corpus(out / "data" / f)) {
      for (int s : rpm::shapes_used(p)) EXPECT_TRUE(s == rpm::pentagon || s == rpm::circle);
    }
  }
}

TEST_F(TrainCli, EvalMatchesManifestTestAccuracy) {
  const auto out = dir_ / "evalcheck";
  ASSERT_EQ(call(with_small({"train", "--data", data_, "--epochs", "2", "--lr", "0.003", "--out",
                             out.string()}))
                .code,
            kOk);
  const auto m = manifest(out);
  const auto r = call({"eval", "--ckpt", (out / "best.ckpt.json").string(), "--data",
                       (out / "data" / "test.jsonl").string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::ostringstream expected;
  expected << "accuracy " << m.at("test_accuracy").get<double>() << " (";
  EXPECT_NE(r.out.find(expected.str()), std::string::npos) << r.out;
}

TEST_F(TrainCli, ConfigFileIsUsedAndFlagsOverrideIt) {
  const auto file = dir_ / "run.json";
  std::ofstream(file) << R"({"mode": "analogy-gen", "epochs": 1, "batch_size": 16, "embed_dim": 12,
                             "latent_dim": 8, "queries": 2})";
  const auto out = dir_ / "cfgfile";
  ASSERT_EQ(call({"train", "--data", data_, "--config-file", file.string(), "--batch", "8",
                  "--quiet", "--out", out.string()})
                .code,
            kOk);
  const auto m = manifest(out);
  EXPECT_EQ(m.at("mode"), "analogy-gen");
  EXPECT_EQ(m.at("config").at("batch_size"), 8);
  EXPECT_EQ(m.at("config").at("queries"), 2);
  EXPECT_EQ(m.at("data").at("config_file"), file.string());
}

TEST_F(TrainCli, SameSeedRunsAreIdentical) {
  for (const char* d : {"det_a", "det_b"}) {
    ASSERT_EQ(call(with_small({"train", "--mode", "meta-contrast", "--data", data_, "--epochs", "1",
                               "--out", (dir_ / d).string()}))
                  .code,
              kOk);
  }
  for (const char* f : {"manifest.json", "last.ckpt.json", "best.ckpt.json", "steps.csv"}) {
    EXPECT_EQ(slurp(dir_ / "det_a" / f), slurp(dir_ / "det_b" / f)) << f;
  }
}

TEST_F(TrainCli, ReportOverTwoRunsHasTwoRows) {
  for (const char* d : {"rep_a", "rep_b"}) {
    ASSERT_EQ(call(with_small({"train", "--data", data_, "--epochs", "1", "--out",
                               (dir_ / d).string()}))
                  .code,
              kOk);
  }
  const auto csv = dir_ / "report.csv";
  const auto r = call({"report", "--run", (dir_ / "rep_a").string(), "--run",
                       (dir_ / "rep_b").string(), "--out", csv.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream lines(slurp(csv));
  std::string line;
  int rows = 0;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("run,mode,", 0), 0u);
  while (std::getline(lines, line)) rows += !line.empty();
  EXPECT_EQ(rows, 2);
  EXPECT_NE(r.out.find("mean test accuracy"), std::string::npos);
}

TEST_F(TrainCli, SplitWritesThreeFiles) {
  const auto out = dir_ / "split";
  ASSERT_EQ(call({"split", "--data", data_, "--out", out.string()}).code, kOk);
  std::size_t total = 0;
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    total += rpm::load_corpus(out / f).size();
  }
  EXPECT_EQ(total, 200u);
}

TEST_F(TrainCli, NonFiniteTrainingExitsWithAbortCode) {
  const auto out = dir_ / "abort";
  const auto r = call(with_small({"train", "--data", data_, "--epochs", "2", "--lr", "1e300",
                                  "--out", out.string()}));
  EXPECT_EQ(r.code, kTrainingAbort);
  EXPECT_TRUE(fs::exists(out / "last_good.ckpt.json"));
}

}  // namespace
}  // namespace analogy::cli
