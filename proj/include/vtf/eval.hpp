#pragma once

#include "vtf/forcereg.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtf::eval {

class EvalError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

/// |pred - gt| / gt; gt must be positive.
double relative_error(double pred, double gt);

MeanStd mean_std(const std::vector<double>& values);
MeanStd mae(const std::vector<double>& preds, const std::vector<double>& gts);
MeanStd mean_relative_error(const std::vector<double>& preds, const std::vector<double>& gts);

/// One 1 N wide bin [lo, hi). Empty bins carry count 0 and no statistics.
struct BinStat {
  int lo = 0;
  int hi = 0;
  std::size_t count = 0;
  std::optional<MeanStd> re;
};

inline constexpr int kBinLow = 1;
inline constexpr int kBinHigh = 20;

/// Relative error per force bin [1,2), ..., [19,20); ground truth outside throws.
std::vector<BinStat> binned_re(const std::vector<double>& preds, const std::vector<double>& gts);

struct MetricReport {
  std::size_t count = 0;
  MeanStd mae_n;
  MeanStd re;
  std::vector<BinStat> per_bin;
};

MetricReport make_report(const std::vector<double>& preds, const std::vector<double>& gts);

/// Experiment settings. The config file is `key = value` per line, `#` comments.
struct ExperimentConfig {
  std::filesystem::path dataset;  // directory of sessions
  std::filesystem::path output;
  std::string model = "rgbmod";   // rgbmod, d, dmod, rgbmod_d or poly
  std::uint64_t seed = 1;         // split and initialization
  int folds = 3;
  int epochs = 25;
  int batch_size = 64;
  double lr = 4e-5;
  int width = 160;
  int height = 120;
  double force_min = 1.0;
  double force_max = 15.0;
};

/// Parses config text; errors name the source and line. Relative paths
/// resolve against base_dir.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "config",
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// "160x120" style resolution.
std::pair<int, int> parse_resolution(const std::string& text);

struct Prediction {
  int fold = 0;
  std::size_t sample = 0;
  std::string indenter;
  double force_gt = 0.0;
  double force_pred = 0.0;
};

struct ExperimentResult {
  std::vector<MetricReport> folds;
  MetricReport aggregate;
  std::vector<Prediction> predictions;  // fold order, then sample order
};

/// Loads every session under cfg.dataset into a store at the configured
/// resolution. Depth images are required when the model consumes them.
force::SampleStore load_store(const ExperimentConfig& cfg);

/// Trains (or fits) per fold, evaluates on each fold's test indenters and,
/// when cfg.output is set, writes report.csv, per_bin.csv, predictions.csv,
/// summary.txt and per-fold models.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const force::SampleStore& store,
                                std::ostream* log = nullptr);
ExperimentResult run_experiment(const std::filesystem::path& config_path, std::ostream* log = nullptr);

void write_report_csv(const std::filesystem::path& path, const ExperimentResult& r);
void write_per_bin_csv(const std::filesystem::path& path, const ExperimentResult& r);
void write_predictions_csv(const std::filesystem::path& path, const ExperimentResult& r);
/// Human-readable summary, three decimals.
std::string summary_text(const std::string& model, const ExperimentResult& r);

}  // namespace vtf::eval
