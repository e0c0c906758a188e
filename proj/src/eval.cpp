#include "vtf/eval.hpp"

#include "vtf/dataio.hpp"
#include "vtf/text.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace vtf::eval {

namespace {

void check_lengths(const std::vector<double>& preds, const std::vector<double>& gts, const char* what) {
  if (preds.size() != gts.size())
    throw EvalError(std::string(what) + ": " + std::to_string(preds.size()) + " predictions for " +
                    std::to_string(gts.size()) + " ground truths");
  if (preds.empty()) throw EvalError(std::string(what) + ": no samples");
}

bool is_poly(const std::string& model) { return model == "poly"; }

}  // namespace

double relative_error(double pred, double gt) {
  if (!(gt > 0.0)) throw EvalError("relative_error: ground truth must be positive, got " + format_real(gt));
  return std::abs(pred - gt) / gt;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw EvalError("mean_std: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / double(values.size()))};
}

MeanStd mae(const std::vector<double>& preds, const std::vector<double>& gts) {
  check_lengths(preds, gts, "mae");
  std::vector<double> err(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) err[i] = std::abs(preds[i] - gts[i]);
  return mean_std(err);
}

MeanStd mean_relative_error(const std::vector<double>& preds, const std::vector<double>& gts) {
  check_lengths(preds, gts, "mean_relative_error");
  std::vector<double> err(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) err[i] = relative_error(preds[i], gts[i]);
  return mean_std(err);
}

std::vector<BinStat> binned_re(const std::vector<double>& preds, const std::vector<double>& gts) {
  if (preds.size() != gts.size()) throw EvalError("binned_re: prediction/ground-truth length mismatch");
  std::vector<std::vector<double>> errs(std::size_t(kBinHigh - kBinLow));
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (!(gts[i] >= kBinLow && gts[i] < kBinHigh))
      throw EvalError("binned_re: ground truth " + format_real(gts[i]) + " N outside [1, 20)");
    errs[std::size_t(std::floor(gts[i])) - kBinLow].push_back(relative_error(preds[i], gts[i]));
  }
  std::vector<BinStat> out;
  for (int b = kBinLow; b < kBinHigh; ++b) {
    const auto& e = errs[std::size_t(b - kBinLow)];
    BinStat s{b, b + 1, e.size(), std::nullopt};
    if (!e.empty()) s.re = mean_std(e);
    out.push_back(s);
  }
  return out;
}

MetricReport make_report(const std::vector<double>& preds, const std::vector<double>& gts) {
  MetricReport r;
  r.count = preds.size();
  r.mae_n = mae(preds, gts);
  r.re = mean_relative_error(preds, gts);
  r.per_bin = binned_re(preds, gts);
  return r;
}

std::pair<int, int> parse_resolution(const std::string& text) {
  const auto parts = split(text, 'x');
  try {
    if (parts.size() == 2) {
      const long long w = parse_integer(parts[0]), h = parse_integer(parts[1]);
      if (w > 0 && h > 0 && w <= 4096 && h <= 4096) return {int(w), int(h)};
    }
  } catch (const std::invalid_argument&) {
  }
  throw EvalError("resolution must look like 160x120, got '" + text + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source, const fs::path& base_dir) {
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  auto resolve = [&](std::string_view v) {
    fs::path p{std::string(v)};
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw EvalError(where + "expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    const std::string_view value = trim(body.substr(eq + 1));
    if (value.empty()) throw EvalError(where + "empty value for '" + key + "'");
    try {
      if (key == "dataset") {
        cfg.dataset = resolve(value);
      } else if (key == "output") {
        cfg.output = resolve(value);
      } else if (key == "model") {
        cfg.model = std::string(value);
        if (!is_poly(cfg.model)) force::parse_kind(cfg.model);
      } else if (key == "seed") {
        const long long s = parse_integer(value);
        if (s < 0) throw EvalError("seed must be non-negative");
        cfg.seed = std::uint64_t(s);
      } else if (key == "folds") {
        cfg.folds = int(parse_integer(value));
        if (cfg.folds < 1) throw EvalError("folds must be >= 1");
      } else if (key == "epochs") {
        cfg.epochs = int(parse_integer(value));
        if (cfg.epochs < 1) throw EvalError("epochs must be >= 1");
      } else if (key == "batch_size") {
        cfg.batch_size = int(parse_integer(value));
        if (cfg.batch_size < 1) throw EvalError("batch_size must be >= 1");
      } else if (key == "lr") {
        cfg.lr = parse_real(value);
        if (!(cfg.lr > 0)) throw EvalError("lr must be positive");
      } else if (key == "resolution") {
        std::tie(cfg.width, cfg.height) = parse_resolution(std::string(value));
      } else if (key == "force_min") {
        cfg.force_min = parse_real(value);
      } else if (key == "force_max") {
        cfg.force_max = parse_real(value);
      } else {
        throw EvalError("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw EvalError(where + e.what());
    }
  }
  if (!(cfg.force_min < cfg.force_max)) throw EvalError(source + ": force_min must be below force_max");
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw EvalError("cannot open config: " + path.string());
  return parse_config(in, path.string(), path.parent_path());
}

force::SampleStore load_store(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw EvalError("config has no dataset");
  const bool poly = is_poly(cfg.model);
  const bool rgb = !poly && force::uses_rgb(force::parse_kind(cfg.model));
  const bool depth = poly || force::uses_depth(force::parse_kind(cfg.model));
  data::IngestOptions opt;
  opt.force_min = cfg.force_min;
  opt.force_max = cfg.force_max;
  const auto samples = data::ingest_sessions(cfg.dataset, opt);
  force::SampleStore store(cfg.width, cfg.height, rgb, depth);
  for (const auto& s : samples) {
    std::optional<ImageF> frame, depth_img;
    if (rgb) frame = load_image(s.frame_path);
    if (depth) {
      if (!s.depth_path) throw EvalError("model " + cfg.model + " needs depth images; missing for " + s.frame_path.string());
      depth_img = load_image(*s.depth_path);
    }
    store.add(frame ? &*frame : nullptr, depth_img ? &*depth_img : nullptr, s.force_n, s.indenter_id);
  }
  return store;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const force::SampleStore& store, std::ostream* log) {
  if (store.size() == 0) throw EvalError("run_experiment: empty dataset");
  const bool poly = is_poly(cfg.model);
  if (poly && !store.has_depth) throw EvalError("poly baseline needs depth images");
  const auto splits = data::split_by_indenter(store.indenter, cfg.seed, cfg.folds);
  if (!cfg.output.empty()) {
    fs::create_directories(cfg.output);
    data::save_split(cfg.output / "split.json", splits, cfg.seed);
  }

  ExperimentResult result;
  std::vector<double> all_pred, all_gt;
  for (int k = 0; k < cfg.folds; ++k) {
    const data::FoldIndices idx = data::partition(store.indenter, splits[std::size_t(k)]);
    if (idx.train.empty() || idx.test.empty()) throw EvalError("fold " + std::to_string(k) + " has no train or test samples");
    std::vector<double> pred;
    if (poly) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i : idx.train) pts.emplace_back(double(store.max_deformation(i)), store.force[i]);
      const force::PolyModel m = force::fit_poly_baseline(pts);
      for (std::size_t i : idx.test) pred.push_back(force::poly_eval(m, double(store.max_deformation(i))));
      if (!cfg.output.empty()) force::save_poly(cfg.output / ("fold" + std::to_string(k) + "_poly.json"), m);
    } else {
      const force::ModelKind kind = force::parse_kind(cfg.model);
      force::ForceNet net = force::build_model(kind, store.width, store.height, cfg.seed + std::uint64_t(k));
      force::TrainConfig tc;
      tc.batch_size = cfg.batch_size;
      tc.lr = cfg.lr;
      tc.epochs = cfg.epochs;
      tc.seed = cfg.seed + std::uint64_t(k);
      auto on_epoch = [&](const force::EpochRecord& e) {
        if (log)
          *log << cfg.model << " fold " << k << " epoch " << e.epoch << " train " << format_fixed(e.train_loss, 4)
               << " val " << format_fixed(e.val_loss, 4) << std::endl;
      };
      const force::TrainResult tr = force::train(std::move(net), store, idx.train, idx.val, tc, on_epoch);
      pred = force::predict_store(tr.model, store, idx.test);
      if (!cfg.output.empty()) {
        force::save_model(cfg.output / ("fold" + std::to_string(k) + ".model"), tr.model);
        force::write_history_csv(cfg.output / ("fold" + std::to_string(k) + "_history.csv"), tr.history);
      }
    }
    std::vector<double> gt;
    for (std::size_t j = 0; j < idx.test.size(); ++j) {
      const std::size_t i = idx.test[j];
      gt.push_back(store.force[i]);
      result.predictions.push_back({k, i, store.indenter[i], store.force[i], pred[j]});
    }
    result.folds.push_back(make_report(pred, gt));
    if (log)
      *log << cfg.model << " fold " << k << " test RE " << format_fixed(result.folds.back().re.mean, 3) << std::endl;
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    all_gt.insert(all_gt.end(), gt.begin(), gt.end());
  }
  result.aggregate = make_report(all_pred, all_gt);

  if (!cfg.output.empty()) {
    write_report_csv(cfg.output / "report.csv", result);
    write_per_bin_csv(cfg.output / "per_bin.csv", result);
    write_predictions_csv(cfg.output / "predictions.csv", result);
    std::ofstream(cfg.output / "summary.txt") << summary_text(cfg.model, result);
  }
  return result;
}

ExperimentResult run_experiment(const fs::path& config_path, std::ostream* log) {
  const ExperimentConfig cfg = load_config(config_path);
  return run_experiment(cfg, load_store(cfg), log);
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write " + path.string());
  return out;
}

template <typename F>
void each_scope(const ExperimentResult& r, F&& f) {
  for (std::size_t k = 0; k < r.folds.size(); ++k) f("fold" + std::to_string(k), r.folds[k]);
  f(std::string("all"), r.aggregate);
}

}  // namespace

void write_report_csv(const fs::path& path, const ExperimentResult& r) {
  auto out = open_csv(path);
  out << "scope,count,mae_mean,mae_std,re_mean,re_std\n";
  each_scope(r, [&](const std::string& scope, const MetricReport& m) {
    out << scope << ',' << m.count << ',' << format_real(m.mae_n.mean) << ',' << format_real(m.mae_n.std) << ','
        << format_real(m.re.mean) << ',' << format_real(m.re.std) << '\n';
  });
}

void write_per_bin_csv(const fs::path& path, const ExperimentResult& r) {
  auto out = open_csv(path);
  out << "scope,bin_lo,bin_hi,count,re_mean,re_std\n";
  each_scope(r, [&](const std::string& scope, const MetricReport& m) {
    for (const BinStat& b : m.per_bin) {
      out << scope << ',' << b.lo << ',' << b.hi << ',' << b.count << ',';
      if (b.re) out << format_real(b.re->mean) << ',' << format_real(b.re->std);
      else out << ',';
      out << '\n';
    }
  });
}

void write_predictions_csv(const fs::path& path, const ExperimentResult& r) {
  auto out = open_csv(path);
  out << "fold,sample,indenter,force_gt,force_pred,relative_error\n";
  for (const Prediction& p : r.predictions)
    out << p.fold << ',' << p.sample << ',' << p.indenter << ',' << format_real(p.force_gt) << ','
        << format_real(p.force_pred) << ',' << format_real(relative_error(p.force_pred, p.force_gt)) << '\n';
}

std::string summary_text(const std::string& model, const ExperimentResult& r) {
  std::ostringstream s;
  s << "model " << model << '\n';
  each_scope(r, [&](const std::string& scope, const MetricReport& m) {
    s << scope << ": n=" << m.count << " MAE " << format_fixed(m.mae_n.mean, 3) << " +- " << format_fixed(m.mae_n.std, 3)
      << " N, RE " << format_fixed(m.re.mean, 3) << " +- " << format_fixed(m.re.std, 3) << '\n';
  });
  s << "per-bin RE (all folds)\n";
  for (const BinStat& b : r.aggregate.per_bin) {
    s << "  [" << b.lo << ',' << b.hi << ") n=" << b.count;
    if (b.re) s << " RE " << format_fixed(b.re->mean, 3) << " +- " << format_fixed(b.re->std, 3);
    s << '\n';
  }
  return s.str();
}

}  // namespace vtf::eval
