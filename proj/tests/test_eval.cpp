#include "vtf/dataio.hpp"
#include "vtf/eval.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace vtf;
using namespace vtf::eval;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("vtf_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "exp.cfg", "/base");
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const EvalError& e) {
    return e.what();
  }
  return "";
}

// Six indenters; the depth blob brightness and frame tint grow with force.
void write_dataset(const fs::path& root) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> force(1.0, 15.0);
  for (int k = 0; k < 6; ++k) {
    const std::string id = "ind" + std::to_string(k);
    data::SessionWriter w(root / id, id);
    fs::create_directories(w.dir / "depth");
    for (int i = 0; i < 8; ++i) {
      const double f = force(rng), t = 0.1 * i;
      ImageF frame(24, 24, 3, 0.3f), depth(24, 24, 1, 0.0f);
      for (int y = 8; y < 16; ++y)
        for (int x = 8; x < 16; ++x) {
          depth.at(x, y) = float(f / 16.0);
          frame.at(x, y, 0) = float(0.3 + f / 30.0);
        }
      save_image(frame, w.add(t, f));
      save_image(depth, w.depth_path(t));
    }
    w.finish();
  }
}

void write_config(const fs::path& path, const std::string& model, const std::string& output) {
  std::ofstream(path) << "# test experiment\n"
                      << "dataset = data\n"
                      << "output = " << output << "\n"
                      << "model = " << model << "   # kind\n"
                      << "epochs = 2\nbatch_size = 8\nlr = 1e-3\nresolution = 16x16\nseed = 4\n";
}

}  // namespace

TEST(Metrics, RelativeError) {
  EXPECT_DOUBLE_EQ(relative_error(5.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(4.5, 5.0), 0.1);
  EXPECT_DOUBLE_EQ(relative_error(6.0, 5.0), 0.2);
  EXPECT_THROW(relative_error(1.0, 0.0), EvalError);
  EXPECT_THROW(relative_error(1.0, -2.0), EvalError);
}

TEST(Metrics, MeanStdIsPopulation) {
  const MeanStd m = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_DOUBLE_EQ(m.std, 2.0);
  EXPECT_THROW(mean_std({}), EvalError);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<double> gt{1.5, 3.0, 14.0};
  const MetricReport r = make_report(gt, gt);
  EXPECT_EQ(r.count, 3u);
  EXPECT_EQ(r.mae_n.mean, 0.0);
  EXPECT_EQ(r.re.mean, 0.0);
  EXPECT_EQ(r.re.std, 0.0);
}

TEST(Metrics, MaeAndRe) {
  const MeanStd a = mae({2.0, 5.0}, {1.0, 4.0});
  EXPECT_DOUBLE_EQ(a.mean, 1.0);
  EXPECT_DOUBLE_EQ(a.std, 0.0);
  const MeanStd r = mean_relative_error({2.0, 5.0}, {1.0, 4.0});
  EXPECT_DOUBLE_EQ(r.mean, (1.0 + 0.25) / 2);
  EXPECT_DOUBLE_EQ(r.std, 0.375);
  EXPECT_THROW(mae({1.0}, {1.0, 2.0}), EvalError);
}

TEST(Bins, HalfOpenUnitBins) {
  const auto bins = binned_re({1.1, 2.0, 2.2, 19.0}, {1.0, 2.0, 2.0, 19.99});
  ASSERT_EQ(bins.size(), std::size_t(kBinHigh - kBinLow));
  EXPECT_EQ(bins[0].lo, 1);
  EXPECT_EQ(bins[0].hi, 2);
  EXPECT_EQ(bins[0].count, 1u);
  EXPECT_NEAR(bins[0].re->mean, 0.1, 1e-12);
  EXPECT_EQ(bins[1].count, 2u);
  EXPECT_NEAR(bins[1].re->mean, 0.05, 1e-12);
  EXPECT_EQ(bins[5].count, 0u);
  EXPECT_FALSE(bins[5].re.has_value());
  EXPECT_EQ(bins.back().count, 1u);
  EXPECT_THROW(binned_re({1.0}, {20.0}), EvalError);
  EXPECT_THROW(binned_re({1.0}, {0.99}), EvalError);
}

TEST(Bins, AggregateIsCountWeightedBinMean) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> f(1.0, 15.0), noise(-0.3, 0.3);
  std::vector<double> gt, pred;
  for (int i = 0; i < 500; ++i) {
    gt.push_back(f(rng));
    pred.push_back(gt.back() * (1.0 + noise(rng)));
  }
  const MetricReport r = make_report(pred, gt);
  double weighted = 0.0;
  std::size_t n = 0;
  for (const auto& b : r.per_bin)
    if (b.re) {
      weighted += b.re->mean * double(b.count);
      n += b.count;
    }
  EXPECT_EQ(n, gt.size());
  EXPECT_NEAR(weighted / double(n), r.re.mean, 1e-12);
}

TEST(Config, ParsesKeysCommentsAndPaths) {
  const ExperimentConfig c = parse("# header\n\ndataset = sessions\noutput=/abs/out\nmodel = poly\nseed = 9\n"
                                   "folds = 2\nepochs = 3 # short\nbatch_size = 16\nlr = 1e-4\nresolution = 80x64\n"
                                   "force_min = 2\nforce_max = 12\n");
  EXPECT_EQ(c.dataset, fs::path("/base/sessions"));
  EXPECT_EQ(c.output, fs::path("/abs/out"));
  EXPECT_EQ(c.model, "poly");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.folds, 2);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_DOUBLE_EQ(c.lr, 1e-4);
  EXPECT_EQ(c.width, 80);
  EXPECT_EQ(c.height, 64);
  EXPECT_EQ(c.force_min, 2.0);
  EXPECT_EQ(c.force_max, 12.0);
}

TEST(Config, DefaultsMatchTrainingSetup) {
  const ExperimentConfig c = parse("");
  EXPECT_EQ(c.model, "rgbmod");
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_DOUBLE_EQ(c.lr, 4e-5);
  EXPECT_EQ(c.epochs, 25);
  EXPECT_EQ(c.folds, 3);
}

TEST(Config, ErrorsNameTheLine) {
  EXPECT_NE(config_error("seed = 1\nbogus = 3\n").find("exp.cfg:2:"), std::string::npos);
  EXPECT_NE(config_error("seed = 1\n\nmodel = resnet\n").find("exp.cfg:3:"), std::string::npos);
  EXPECT_NE(config_error("epochs\n").find("exp.cfg:1:"), std::string::npos);
  EXPECT_NE(config_error("lr = fast\n").find("exp.cfg:1:"), std::string::npos);
  EXPECT_NE(config_error("x\nresolution = 160\n").find("exp.cfg:1:"), std::string::npos);
  EXPECT_NE(config_error("folds = 0\n").find("exp.cfg:1:"), std::string::npos);
  EXPECT_FALSE(config_error("force_min = 5\nforce_max = 5\n").empty());
  EXPECT_THROW(load_config("/nonexistent/exp.cfg"), EvalError);
}

TEST(Config, Resolution) {
  EXPECT_EQ(parse_resolution("160x120"), std::make_pair(160, 120));
  EXPECT_THROW(parse_resolution("160"), EvalError);
  EXPECT_THROW(parse_resolution("0x8"), EvalError);
}

TEST(Experiment, PolyBaselineEndToEnd) {
  const fs::path root = temp_dir("poly");
  write_dataset(root / "data");
  write_config(root / "exp.cfg", "poly", "out");
  const ExperimentResult r = run_experiment(root / "exp.cfg");
  ASSERT_EQ(r.folds.size(), 3u);
  std::size_t n = 0;
  for (const auto& f : r.folds) n += f.count;
  EXPECT_EQ(r.aggregate.count, n);
  EXPECT_EQ(r.predictions.size(), n);
  // Depth brightness is linear in force, so the cubic is exact up to quantization.
  EXPECT_LT(r.aggregate.re.mean, 0.02);
  for (const char* f : {"report.csv", "per_bin.csv", "predictions.csv", "summary.txt", "split.json", "fold0_poly.json"})
    EXPECT_TRUE(fs::exists(root / "out" / f)) << f;
  std::ifstream in(root / "out" / "report.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "scope,count,mae_mean,mae_std,re_mean,re_std");
}

TEST(Experiment, NetworkRunsAreReproducible) {
  const fs::path root = temp_dir("net");
  write_dataset(root / "data");
  write_config(root / "a.cfg", "rgbmod_d", "out_a");
  write_config(root / "b.cfg", "rgbmod_d", "out_b");
  const ExperimentResult a = run_experiment(root / "a.cfg");
  run_experiment(root / "b.cfg");
  for (const char* f : {"report.csv", "per_bin.csv", "predictions.csv"})
    EXPECT_EQ(read_file(root / "out_a" / f), read_file(root / "out_b" / f)) << f;
  EXPECT_TRUE(fs::exists(root / "out_a" / "fold2.model"));
  EXPECT_TRUE(fs::exists(root / "out_a" / "fold2_history.csv"));
  EXPECT_EQ(a.folds.size(), 3u);
}

TEST(Experiment, MissingDepthIsReported) {
  const fs::path root = temp_dir("nodepth");
  write_dataset(root / "data");
  for (const auto& e : fs::directory_iterator(root / "data")) fs::remove_all(e.path() / "depth");
  write_config(root / "exp.cfg", "d", "out");
  EXPECT_THROW(run_experiment(root / "exp.cfg"), EvalError);
  force::SampleStore rgb_only(16, 16, true, false);
  ExperimentConfig cfg;
  cfg.model = "poly";
  ImageF f(16, 16, 3, 0.5f);
  rgb_only.add(&f, nullptr, 2.0, "a");
  EXPECT_THROW(run_experiment(cfg, rgb_only), EvalError);
}

TEST(Summary, ThreeDecimals) {
  ExperimentResult r;
  r.aggregate = make_report({1.1, 2.0}, {1.0, 2.0});
  r.folds.push_back(r.aggregate);
  const std::string s = summary_text("poly", r);
  EXPECT_NE(s.find("0.050"), std::string::npos) << s;
}
