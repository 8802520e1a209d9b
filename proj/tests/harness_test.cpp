// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "vtcas/config.hpp"
#include "vtcas/error.hpp"
#include "vtcas/metrics.hpp"
#include "vtcas/rng.hpp"
#include "vtcas_cli/cli.hpp"

namespace vtcas {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::temp_directory_path() / "vtcas-tests" / (std::string(info->test_suite_name()) + "." + info->name()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << bytes;
}

// --- synthetic data ------------------------------------------------------------

TEST(Synth, SameSeedSameBytes) {
  DatasetSpec spec;
  spec.count = 60;
  const DatasetSplits a = synth_dataset(spec), b = synth_dataset(spec);
  EXPECT_EQ(a.train.pixels, b.train.pixels);
  EXPECT_EQ(a.val.pixels, b.val.pixels);
  EXPECT_EQ(a.train.labels, b.train.labels);
  spec.seed = 2;
  EXPECT_NE(synth_dataset(spec).train.pixels, a.train.pixels);
}

TEST(Synth, BalancedSplits) {
  DatasetSpec spec;  // 750 images, 600 / 150, side 32
  const DatasetSplits d = synth_dataset(spec);
  ASSERT_EQ(d.train.size(), 600u);
  ASSERT_EQ(d.val.size(), 150u);
  EXPECT_EQ(d.train.height, 32u);
  for (const ImageSet* s : {&d.train, &d.val}) {
    std::map<int, std::size_t> counts;
    for (auto l : s->labels) ++counts[l];
    ASSERT_EQ(counts.size(), 3u);
    for (const auto& [k, n] : counts) EXPECT_LE(std::abs(static_cast<long>(n) - static_cast<long>(s->size() / 3)), 1);
  }
}

TEST(Synth, SplitsAreDistinctImages) {
  DatasetSpec spec;
  spec.count = 90;
  const DatasetSplits d = synth_dataset(spec);
  const std::size_t n = d.train.image_bytes();
  for (std::size_t i = 0; i < d.train.size(); ++i)
    for (std::size_t j = 0; j < d.val.size(); ++j)
      EXPECT_FALSE(std::equal(d.train.pixels.begin() + i * n, d.train.pixels.begin() + (i + 1) * n,
                              d.val.pixels.begin() + j * n));
}

TEST(Synth, NoiseFreeNearestCentroidIsPerfect) {
  DatasetSpec spec;
  spec.count = 300;
  spec.noise = 0.0;
  const ImageSet s = synth_dataset(spec).train;
  const std::size_t n = s.image_bytes(), k = 3;
  std::vector<std::vector<double>> centroid(k, std::vector<double>(n, 0.0));
  std::vector<double> counts(k, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    counts[s.labels[i]] += 1.0;
    for (std::size_t p = 0; p < n; ++p) centroid[s.labels[i]][p] += s.pixels[i * n + p];
  }
  for (std::size_t c = 0; c < k; ++c)
    for (double& v : centroid[c]) v /= counts[c];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      double d = 0.0;
      for (std::size_t p = 0; p < n; ++p) d += std::pow(s.pixels[i * n + p] - centroid[c][p], 2);
      if (d < best_d) best_d = d, best = c;
    }
    hits += best == s.labels[i];
  }
  EXPECT_EQ(hits, s.size());
}

TEST(Synth, InvalidSpecs) {
  DatasetSpec spec;
  spec.classes = 1;
  EXPECT_THROW(synth_dataset(spec), ConfigError);
  spec = {};
  spec.train_fraction = 0.9;
  EXPECT_THROW(synth_dataset(spec), ConfigError);
  spec = {};
  spec.count = 5;  // a 1-image validation split cannot hold 3 classes
  EXPECT_THROW(synth_dataset(spec), ConfigError);
}

TEST(Batches, NormalizationAndLayout) {
  ImageSet s;
  s.height = 1;
  s.width = 2;
  s.channels = 3;
  s.pixels = {0, 255, 51, 102, 153, 204};  // HWC
  s.labels = {1};
  const std::size_t idx[] = {0};
  const Tensor t = batch_images(s, idx);
  ASSERT_EQ(t.shape(), (Shape{1, 3, 1, 2}));
  const double expect[] = {0, 102, 255, 153, 51, 204};  // CHW
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(t[i], (expect[i] / 255.0 - 0.5) / 0.25, 1e-15);
  EXPECT_EQ(batch_labels(s, idx), std::vector<int>{1});
}

TEST(Batches, ShuffleIsPermutation) {
  Rng rng(3);
  const auto b = make_batches(23, 5, &rng);
  ASSERT_EQ(b.size(), 5u);
  EXPECT_EQ(b.back().size(), 3u);
  std::vector<std::size_t> all;
  for (const auto& v : b) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 23; ++i) EXPECT_EQ(all[i], i);
}

// --- TIMG ---------------------------------------------------------------------

std::string u32le(std::uint32_t v) {
  return std::string{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff), static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>(v >> 24)};
}

std::string timg_bytes(std::uint32_t count, std::uint32_t h, std::uint32_t w, std::uint32_t c, std::size_t payload) {
  return "TIMG" + u32le(1) + u32le(count) + u32le(h) + u32le(w) + u32le(c) + std::string(payload, '\x07');
}

std::string tlbl_bytes(std::uint32_t count, std::size_t payload) {
  return "TLBL" + u32le(1) + u32le(count) + std::string(payload, '\x01');
}

TEST(Timg, RoundTripIsBitwise) {
  const fs::path dir = scratch("rt");
  DatasetSpec spec;
  spec.count = 30;
  spec.side = 7;
  const ImageSet s = synth_dataset(spec).train;
  save_timg(dir / "a.timg", dir / "a.tlbl", s);
  const ImageSet back = load_timg(dir / "a.timg", dir / "a.tlbl");
  EXPECT_EQ(back.pixels, s.pixels);
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.height, 7u);
  EXPECT_EQ(back.channels, 3u);
  // Header layout.
  const std::string bytes = slurp(dir / "a.timg");
  EXPECT_EQ(bytes.substr(0, 24), "TIMG" + u32le(1) + u32le(24) + u32le(7) + u32le(7) + u32le(3));
  EXPECT_EQ(bytes.size(), 24u + 24u * 147u);
}

TEST(Timg, MalformedCorpus) {
  const fs::path dir = scratch("bad");
  spill(dir / "ok.tlbl", tlbl_bytes(10, 10));
  spill(dir / "ok.timg", timg_bytes(10, 2, 2, 1, 40));
  EXPECT_NO_THROW(load_timg(dir / "ok.timg", dir / "ok.tlbl"));
  struct Case {
    std::string name, images, labels, needle;
  };
  const std::vector<Case> corpus = {
      {"magic", "TIMX" + timg_bytes(10, 2, 2, 1, 40).substr(4), tlbl_bytes(10, 10), "54 49 4d 58"},
      {"short_payload", timg_bytes(10, 2, 2, 1, 36), tlbl_bytes(10, 10), "truncated"},
      {"trailing", timg_bytes(10, 2, 2, 1, 41), tlbl_bytes(10, 10), "trailing"},
      {"short_header", timg_bytes(10, 2, 2, 1, 0).substr(0, 15), tlbl_bytes(10, 10), "truncated"},
      {"version", "TIMG" + u32le(2) + timg_bytes(10, 2, 2, 1, 40).substr(8), tlbl_bytes(10, 10), "version"},
      {"label_count", timg_bytes(10, 2, 2, 1, 40), tlbl_bytes(9, 9), "does not match"},
      {"label_magic", timg_bytes(10, 2, 2, 1, 40), "TIMG" + tlbl_bytes(10, 10).substr(4), "bad magic"},
      {"label_short", timg_bytes(10, 2, 2, 1, 40), tlbl_bytes(10, 8), "truncated"},
      {"huge_count", timg_bytes(0xffffffffu, 0xffff, 0xffff, 0xffff, 8), tlbl_bytes(10, 10), "truncated"},
      {"zero_dim", timg_bytes(10, 0, 2, 1, 0), tlbl_bytes(10, 10), "zero"},
      {"empty", "", tlbl_bytes(10, 10), "truncated"},
  };
  for (const Case& c : corpus) {
    SCOPED_TRACE(c.name);
    spill(dir / (c.name + ".timg"), c.images);
    spill(dir / (c.name + ".tlbl"), c.labels);
    try {
      load_timg(dir / (c.name + ".timg"), dir / (c.name + ".tlbl"));
      ADD_FAILURE() << "accepted";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(c.needle), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(load_timg(dir / "missing.timg", dir / "ok.tlbl"), FormatError);
}

// --- run configuration ----------------------------------------------------------

TEST(Config, MinimalDocumentKeepsDefaults) {
  const RunConfig c = parse_run_config(R"({"version": 1})");
  EXPECT_EQ(dump_run_config(c), dump_run_config(default_run_config()));
  EXPECT_EQ(c.search.stages[0].channels, 8u);
  EXPECT_EQ(c.eval.image_side, 64u);
}

TEST(Config, OverridesAndPresets) {
  const RunConfig c = parse_run_config(R"({
    "version": 1, "seed": 42,
    "search": {"preset": "reference", "stages": [{}, {"epochs": 7, "arch_start": 3}, {}]},
    "eval": {"preset": "full", "classes": 10},
    "train": {"epochs": 4, "warmup": 1}
  })");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.search.stages[1].channels, 72u);
  EXPECT_EQ(c.search.stages[1].epochs, 7u);
  EXPECT_EQ(c.search.stages[0].epochs, 50u);
  EXPECT_EQ(c.eval.dims[3], 768u);
  EXPECT_EQ(c.eval.classes, 10u);
  EXPECT_EQ(c.train.warmup, 1u);
}

TEST(Config, DumpRoundTrips) {
  RunConfig c = parse_run_config(R"({"version": 1, "seed": 9, "search": {"preset": "reference"}, "train": {"warmup": 2}})");
  const std::string text = dump_run_config(c);
  EXPECT_EQ(dump_run_config(parse_run_config(text)), text);
}

TEST(Config, RejectsBadDocuments) {
  const auto expect_error = [](const std::string& doc, const std::string& needle) {
    try {
      parse_run_config(doc);
      ADD_FAILURE() << "accepted: " << doc;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error(R"({"seed": 1})", "version");
  expect_error(R"({"version": 2})", "version");
  expect_error(R"({"version": 1, "sede": 1})", "'sede'");
  expect_error(R"({"version": 1, "search": {"stages": [{}, {"chanels": 3}, {}]}})", "search.stages[1].chanels");
  expect_error(R"({"version": 1, "eval": {"dims": [1, 2, 3]}})", "eval.dims");
  expect_error(R"({"version": 1, "seed": -3})", "seed");
  expect_error(R"({"version": 1, "train": {"lr": "fast"}})", "train.lr");
  expect_error(R"({"version": 1, "search": {"preset": "huge"}})", "huge");
  expect_error(R"({"version": 1, "search": {"stages": [{"ops": 6}, {}, {}]}})", "");
  expect_error(R"({"version": 1, "mode": "dance"})", "dance");
  expect_error(R"({"version": 1, "data": {"source": "files"}})", "train_images");
  expect_error("[1, 2]", "object");
  expect_error("{", "invalid JSON");
}

TEST(Config, HashTracksContentNotLocation) {
  RunConfig a = default_run_config();
  RunConfig b = a;
  b.out = "/elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b.search.stages[2].arch_lr = 1e-3;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, RelativePathsResolveAgainstConfigFile) {
  const fs::path dir = scratch("cfg");
  spill(dir / "run.json", R"({"version": 1, "out": "results", "genotype": "g.json"})");
  const RunConfig c = load_run_config(dir / "run.json");
  EXPECT_EQ(c.out, dir / "results");
  EXPECT_EQ(c.genotype, dir / "g.json");
  EXPECT_THROW(load_run_config(dir / "absent.json"), ConfigError);
}

TEST(Config, FileDataSource) {
  const fs::path dir = scratch("files");
  DatasetSpec spec;
  spec.count = 30;
  const DatasetSplits d = synth_dataset(spec);
  save_timg(dir / "t.timg", dir / "t.tlbl", d.train);
  save_timg(dir / "v.timg", dir / "v.tlbl", d.val);
  spill(dir / "run.json", R"({"version": 1, "data": {"source": "files", "train_images": "t.timg",
        "train_labels": "t.tlbl", "val_images": "v.timg", "val_labels": "v.tlbl"}})");
  const RunConfig c = load_run_config(dir / "run.json");
  const DatasetSplits back = load_data(c.data, 123);
  EXPECT_EQ(back.train.pixels, d.train.pixels);
  EXPECT_EQ(back.val.labels, d.val.labels);
}

// --- metrics log -----------------------------------------------------------------

TEST(Metrics, HeaderOnceAndParseBack) {
  const fs::path p = scratch("m") / "metrics.csv";
  std::vector<MetricsRow> rows = {{1, 0, "train", 1.0986122886681098, 0.3333333333, 0.025, 0.0123456789},
                                  {1, 0, "arch", 1.05, 0.5, 3e-4, 0.02},
                                  {1, 1, "train", 0.912345678901, 2.0 / 3.0, 0.0125, 1.5},
                                  {2, 0, "train", 1e-7, 1.0, 1e-9, 123.456}};
  {
    MetricsLogger log(p);
    for (const auto& r : rows) log.log(r);
    EXPECT_EQ(log.rows(), 4u);
    // Flushed per row: visible before the logger closes.
    EXPECT_EQ(read_metrics(p).size(), 4u);
  }
  const std::string text = slurp(p);
  EXPECT_EQ(text.find(kMetricsHeader), 0u);
  EXPECT_EQ(text.find("stage,", 1), std::string::npos);
  const auto back = read_metrics(p);
  ASSERT_EQ(back.size(), rows.size());
  const auto close6 = [](double a, double b) { return std::abs(a - b) <= 5e-6 * std::max(std::abs(a), std::abs(b)); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].stage, rows[i].stage);
    EXPECT_EQ(back[i].epoch, rows[i].epoch);
    EXPECT_EQ(back[i].phase, rows[i].phase);
    EXPECT_TRUE(close6(back[i].loss, rows[i].loss));
    EXPECT_TRUE(close6(back[i].acc, rows[i].acc));
    EXPECT_TRUE(close6(back[i].lr, rows[i].lr));
    EXPECT_TRUE(close6(back[i].seconds, rows[i].seconds));
  }
}

TEST(Metrics, OrderAndPathErrors) {
  const fs::path dir = scratch("m");
  MetricsLogger log(dir / "a.csv");
  log.log({2, 3, "train"});
  log.log({2, 3, "val"});
  EXPECT_THROW(log.log({2, 2, "train"}), Error);
  EXPECT_THROW(log.log({1, 9, "train"}), Error);
  EXPECT_THROW(log.log({2, 4, "a,b"}), Error);
  EXPECT_THROW(MetricsLogger(dir / "no" / "such" / "dir.csv"), Error);
  spill(dir / "bad.csv", "stage,epoch\n");
  EXPECT_THROW(read_metrics(dir / "bad.csv"), FormatError);
  spill(dir / "bad2.csv", std::string(kMetricsHeader) + "\n1,x,train,1,1,1,1\n");
  EXPECT_THROW(read_metrics(dir / "bad2.csv"), FormatError);
}

// --- command line -------------------------------------------------------------------

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args, cli::Environment env = {}) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err, env);
  return {code, out.str(), err.str()};
}

const fs::path kConfigs = VTCAS_CONFIG_DIR;

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"fly"}).code, 2);
  EXPECT_EQ(cli({"search", "--bogus"}).code, 2);
  EXPECT_EQ(cli({"search", "--config", "/nonexistent/x.json"}).code, 2);
  EXPECT_EQ(cli({"verify-transform", "--trials", "0"}).code, 2);
  EXPECT_EQ(cli({"shapes", "--preset", "huge"}).code, 2);
  EXPECT_EQ(cli({"gradcheck", "--seeds", "x"}).code, 2);
  CliRun r = cli({"shapes", "--side", "66"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("does not divide"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, VerificationCommands) {
  CliRun r = cli({"gradcheck", "--seeds", "1"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("sw_msa"), std::string::npos);
  EXPECT_NE(r.out.find("passed"), std::string::npos);
  // Central differences cannot meet an absurd tolerance.
  r = cli({"gradcheck", "--seeds", "1", "--tol", "1e-15"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  r = cli({"verify-transform"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("50 trials"), std::string::npos);
  r = cli({"shapes"});
  EXPECT_EQ(r.code, 0);
  for (const char* tok : {"3136", "784", "196", "49"}) EXPECT_NE(r.out.find(tok), std::string::npos) << tok;
}

TEST(Cli, SearchWritesArtifactsDeterministically) {
  const fs::path dir = scratch("search");
  const std::string cfg = (kConfigs / "tiny.json").string();
  CliRun a = cli({"search", "--config", cfg, "--out", (dir / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  CliRun b = cli({"search", "--config", cfg, "--out", (dir / "b").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string ga = slurp(dir / "a" / "genotype.json");
  EXPECT_EQ(ga, slurp(dir / "b" / "genotype.json"));
  const Genotype g = genotype_decode(ga);
  EXPECT_EQ(g.meta.seed, 7u);
  EXPECT_EQ(g.meta.schedule_hash, config_hash(load_run_config(cfg)));
  EXPECT_NE(slurp(dir / "a" / "run.json").find(g.meta.schedule_hash), std::string::npos);
  const auto rows = read_metrics(dir / "a" / "metrics.csv");
  EXPECT_EQ(rows.size(), 3u * (2u + 1u));
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_LE(std::pair(rows[i - 1].stage, rows[i - 1].epoch), std::pair(rows[i].stage, rows[i].epoch));
  CliRun c = cli({"search", "--config", cfg, "--seed", "8", "--out", (dir / "c").string()});
  ASSERT_EQ(c.code, 0);
  EXPECT_EQ(genotype_decode(slurp(dir / "c" / "genotype.json")).meta.seed, 8u);
}

TEST(Cli, SeedPrecedence) {
  const fs::path dir = scratch("seed");
  spill(dir / "noseed.json", R"({"version": 1, "data": {"count": 12, "side": 8, "train_fraction": 0.5, "val_fraction": 0.5}})");
  CliRun r = cli({"synth", "--config", (dir / "noseed.json").string(), "--out", (dir / "e").string()}, {"5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "e" / "run.json").find("\"seed\": 5"), std::string::npos);
  r = cli({"synth", "--config", (dir / "noseed.json").string(), "--seed", "6", "--out", (dir / "f").string()}, {"5"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(slurp(dir / "f" / "run.json").find("\"seed\": 6"), std::string::npos);
  r = cli({"synth", "--config", (kConfigs / "tiny.json").string(), "--out", (dir / "g").string()}, {"5"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(slurp(dir / "g" / "run.json").find("\"seed\": 7"), std::string::npos);
  EXPECT_EQ(cli({"synth", "--out", (dir / "h").string()}, {"abc"}).code, 2);
}

TEST(Cli, SynthWritesLoadableTimg) {
  const fs::path dir = scratch("synth");
  CliRun r = cli({"synth", "--config", (kConfigs / "tiny.json").string(), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  RunConfig cfg = load_run_config(kConfigs / "tiny.json");
  const DatasetSplits d = load_data(cfg.data, cfg.seed);
  const ImageSet back = load_timg(dir / "train.timg", dir / "train.tlbl");
  EXPECT_EQ(back.pixels, d.train.pixels);
  EXPECT_EQ(back.labels, d.train.labels);
  EXPECT_FALSE(fs::exists(dir / "test.timg"));
}

TEST(Cli, TrainFromGenotypeFile) {
  const fs::path dir = scratch("train");
  const std::string cfg = (kConfigs / "tiny.json").string();
  spill(dir / "g.json", genotype_encode(uniform_genotype(OpKind::kSepConv3x3)));
  CliRun r = cli({"train", "--config", cfg, "--genotype", (dir / "g.json").string(), "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_metrics(dir / "o" / "metrics.csv").size(), 4u);
  EXPECT_NE(slurp(dir / "o" / "result.json").find("\"parameters\""), std::string::npos);
  spill(dir / "bad.json", R"({"version":1,"edges":[{"from":0,"to":1,"op":"conv_5x5"}]})");
  r = cli({"train", "--config", cfg, "--genotype", (dir / "bad.json").string(), "--out", (dir / "p").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("conv_5x5"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"train", "--config", cfg, "--genotype", "uniform:conv_9x9", "--out", (dir / "q").string()}).code, 2);
  EXPECT_EQ(cli({"train", "--config", cfg, "--genotype", "uniform:skip", "--out", (dir / "s").string()}).code, 0);
}

TEST(Cli, TrainRejectsMismatchedImages) {
  const fs::path dir = scratch("mismatch");
  spill(dir / "c.json", R"({"version": 1, "data": {"count": 12, "side": 32, "train_fraction": 0.5, "val_fraction": 0.5},
        "train": {"epochs": 1}})");
  CliRun r = cli({"train", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("network expects"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace vtcas
