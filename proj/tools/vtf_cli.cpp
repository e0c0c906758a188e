// Command-line front end: synthetic data, calibration, reconstruction,
// force-model training and evaluation.

#include "vtf/dataio.hpp"
#include "vtf/eval.hpp"
#include "vtf/pipeline.hpp"
#include "vtf/text.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace vtf;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string resolution = "160x120";
  double force_min = 1.0;
  double force_max = 15.0;
  double mask_threshold = kDefaultMaskThreshold;
  int folds = 3;
};

void add_seed(CLI::App* app, Common& c) { app->add_option("--seed", c.seed, "Random seed")->capture_default_str(); }
void add_resolution(CLI::App* app, Common& c) {
  app->add_option("--resolution", c.resolution, "Image size WxH")->capture_default_str();
}
void add_force_range(CLI::App* app, Common& c) {
  app->add_option("--force-min", c.force_min, "Lower force bound (N)")->capture_default_str();
  app->add_option("--force-max", c.force_max, "Upper force bound (N)")->capture_default_str();
}
void add_mask(CLI::App* app, Common& c) {
  app->add_option("--mask-threshold", c.mask_threshold, "Contact mask threshold on [0,1] intensities")
      ->capture_default_str();
}
void add_folds(CLI::App* app, Common& c) {
  app->add_option("--folds", c.folds, "Number of indenter folds")->capture_default_str()->check(CLI::PositiveNumber);
}

eval::ExperimentConfig experiment_config(const Common& c, const fs::path& sessions, const std::string& model) {
  eval::ExperimentConfig cfg;
  cfg.dataset = sessions;
  cfg.model = model;
  cfg.seed = c.seed;
  cfg.folds = c.folds;
  std::tie(cfg.width, cfg.height) = eval::parse_resolution(c.resolution);
  cfg.force_min = c.force_min;
  cfg.force_max = c.force_max;
  return cfg;
}

data::FoldIndices fold_indices(const force::SampleStore& store, const Common& c, int fold) {
  if (fold < 0 || fold >= c.folds) throw std::invalid_argument("--fold must be in [0, folds)");
  const auto splits = data::split_by_indenter(store.indenter, c.seed, c.folds);
  return data::partition(store.indenter, splits[std::size_t(fold)]);
}

void write_reports(const fs::path& dir, const std::string& model, int fold, const force::SampleStore& store,
                   const std::vector<std::size_t>& test, const std::vector<double>& pred) {
  eval::ExperimentResult r;
  std::vector<double> gt;
  for (std::size_t j = 0; j < test.size(); ++j) {
    gt.push_back(store.force[test[j]]);
    r.predictions.push_back({fold, test[j], store.indenter[test[j]], store.force[test[j]], pred[j]});
  }
  r.folds.push_back(eval::make_report(pred, gt));
  r.aggregate = r.folds.back();
  fs::create_directories(dir);
  eval::write_report_csv(dir / "report.csv", r);
  eval::write_per_bin_csv(dir / "per_bin.csv", r);
  eval::write_predictions_csv(dir / "predictions.csv", r);
  const std::string summary = eval::summary_text(model, r);
  std::ofstream(dir / "summary.txt") << summary;
  std::cout << summary;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markerless visuotactile depth reconstruction and force estimation"};
  app.require_subcommand(1);
  Common common;

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic dataset and calibration presses");
  fs::path synth_out;
  int presses = 146, indenter_count = 18, calib_presses = 40;
  double noise = 0.01, indenter_scale = 1.0;
  fs::path synth_calibration;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--presses", presses, "Presses per location")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--indenters", indenter_count, "Number of standard indenters (1-18)")
      ->capture_default_str()
      ->check(CLI::Range(1, 18));
  synth_cmd->add_option("--scale", indenter_scale, "Indenter size multiplier")->capture_default_str();
  synth_cmd->add_option("--noise", noise, "Pixel noise sigma")->capture_default_str();
  synth_cmd->add_option("--calibration-presses", calib_presses, "Sphere presses for calibration")->capture_default_str();
  synth_cmd->add_option("--with-depth", synth_calibration, "Calibration directory used to add depth images");
  add_seed(synth_cmd, common);
  add_resolution(synth_cmd, common);
  add_force_range(synth_cmd, common);
  add_mask(synth_cmd, common);

  // calibrate
  auto* calib_cmd = app.add_subcommand("calibrate", "Fit the colour-to-normal model on sphere presses");
  fs::path press_file, reference_path, calib_out;
  CalibrationConfig calib_cfg;
  calib_cmd->add_option("--presses", press_file, "Press records (JSON Lines)")->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--reference", reference_path, "No-contact frame")->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--out", calib_out, "Output directory")->required();
  calib_cmd->add_option("--epochs", calib_cfg.epochs, "Training epochs")->capture_default_str();
  calib_cmd->add_option("--hidden", calib_cfg.hidden, "Hidden units per layer")->capture_default_str();
  add_seed(calib_cmd, common);
  add_mask(calib_cmd, common);

  // reconstruct
  auto* recon_cmd = app.add_subcommand("reconstruct", "Turn frames into depth images");
  fs::path recon_calibration, recon_sessions, recon_frame, recon_out;
  recon_cmd->add_option("--calibration", recon_calibration, "Calibration directory")->required();
  auto* sessions_opt = recon_cmd->add_option("--sessions", recon_sessions, "Session root; writes depth/ per session");
  auto* frame_opt = recon_cmd->add_option("--frame", recon_frame, "Single frame")->check(CLI::ExistingFile);
  recon_cmd->add_option("--out", recon_out, "Output depth image for --frame");
  sessions_opt->excludes(frame_opt);
  add_mask(recon_cmd, common);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a force model on one fold");
  fs::path train_sessions, train_out;
  std::string kind_name = "rgbmod";
  int fold = 0;
  force::TrainConfig train_cfg;
  train_cmd->add_option("--sessions", train_sessions, "Session root")->required();
  train_cmd->add_option("--kind", kind_name, "rgbmod, d, dmod or rgbmod_d")->capture_default_str();
  train_cmd->add_option("--fold", fold, "Fold index")->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  add_seed(train_cmd, common);
  add_resolution(train_cmd, common);
  add_force_range(train_cmd, common);
  add_folds(train_cmd, common);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a force model on a fold's test indenters");
  fs::path eval_model, eval_sessions, eval_out;
  eval_cmd->add_option("--model", eval_model, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--sessions", eval_sessions, "Session root")->required();
  eval_cmd->add_option("--fold", fold, "Fold index")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report directory")->required();
  add_seed(eval_cmd, common);
  add_force_range(eval_cmd, common);
  add_folds(eval_cmd, common);

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "Cubic max-deformation baseline on one fold");
  fs::path base_sessions, base_out;
  base_cmd->add_option("--sessions", base_sessions, "Session root with depth images")->required();
  base_cmd->add_option("--fold", fold, "Fold index")->capture_default_str();
  base_cmd->add_option("--out", base_out, "Output directory")->required();
  add_seed(base_cmd, common);
  add_resolution(base_cmd, common);
  add_force_range(base_cmd, common);
  add_folds(base_cmd, common);

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run every fold from a config file");
  fs::path config_path;
  exp_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    ReconstructOptions recon_opt;
    recon_opt.mask_threshold = common.mask_threshold;

    if (*synth_cmd) {
      const auto [w, h] = eval::parse_resolution(common.resolution);
      synth::CalibrationPressSpec cs;
      cs.count = calib_presses;
      cs.width = w;
      cs.height = h;
      cs.noise_sigma = noise;
      const fs::path calib_dir = synth_out / "calibration";
      fs::create_directories(calib_dir / "frames");
      const auto sphere_presses = pipeline::synthetic_presses(cs, common.seed);
      std::vector<PressRecord> records;
      for (std::size_t i = 0; i < sphere_presses.size(); ++i) {
        const std::string name = "frames/press_" + std::to_string(i) + ".png";
        save_image(sphere_presses[i].frame, calib_dir / name);
        records.push_back({name, sphere_presses[i].center_px, sphere_presses[i].radius_px,
                           sphere_presses[i].press_depth_px});
      }
      write_press_records(calib_dir / "presses.jsonl", records);
      ImageF reference = synth::render_tactile(FieldD::Zero(h, w), cs.lights);
      save_image(reference, calib_dir / "reference.png");

      synth::DatasetSpec ds;
      auto indenters = synth::standard_indenters(indenter_scale);
      indenters.resize(std::size_t(indenter_count));
      ds.indenters = indenters;
      ds.locations = synth::standard_locations(w, h);
      ds.presses_per_location = presses;
      ds.force_min = common.force_min;
      ds.force_max = common.force_max;
      ds.width = w;
      ds.height = h;
      ds.noise_sigma = noise;
      const auto dataset = synth::generate_dataset(ds, common.seed);
      std::optional<pipeline::Calibration> calib;
      if (!synth_calibration.empty()) calib = pipeline::load_calibration(synth_calibration);
      pipeline::write_sessions(dataset, synth_out / "sessions", calib ? &*calib : nullptr, recon_opt);
      std::cout << "wrote " << dataset.samples.size() << " samples in " << indenters.size() << " sessions and "
                << records.size() << " calibration presses to " << synth_out.string() << '\n';
    } else if (*calib_cmd) {
      calib_cfg.seed = common.seed;
      calib_cfg.mask_threshold = common.mask_threshold;
      const ImageF reference = load_image(reference_path);
      CalibrationResult r = calibrate(load_presses(press_file), reference, calib_cfg);
      pipeline::Calibration c{std::move(r.mlp), {}, reference};
      c.scale.max_depth = r.max_depth;
      c.scale.calibrated_at = utc_timestamp();
      pipeline::save_calibration(calib_out, c);
      std::cout << "final loss " << format_real(r.loss_history.back()) << ", max depth "
                << format_fixed(r.max_depth, 3) << " px\n";
    } else if (*recon_cmd) {
      const pipeline::Calibration c = pipeline::load_calibration(recon_calibration);
      if (!recon_sessions.empty()) {
        std::cout << "reconstructed " << pipeline::reconstruct_sessions(recon_sessions, c, recon_opt) << " frames\n";
      } else if (!recon_frame.empty()) {
        if (recon_out.empty()) throw std::invalid_argument("--frame needs --out");
        save_image(reconstruct(c.mlp, load_image(recon_frame), c.reference, c.scale, recon_opt).depth_image, recon_out);
      } else {
        throw std::invalid_argument("reconstruct needs --sessions or --frame");
      }
    } else if (*train_cmd) {
      const force::ModelKind kind = force::parse_kind(kind_name);
      const auto cfg = experiment_config(common, train_sessions, kind_name);
      const auto store = eval::load_store(cfg);
      const auto idx = fold_indices(store, common, fold);
      train_cfg.seed = common.seed + std::uint64_t(fold);
      auto model = force::build_model(kind, cfg.width, cfg.height, train_cfg.seed);
      const auto r = force::train(std::move(model), store, idx.train, idx.val, train_cfg, [](const force::EpochRecord& e) {
        std::cout << "epoch " << e.epoch << " train " << format_fixed(e.train_loss, 4) << " val "
                  << format_fixed(e.val_loss, 4) << std::endl;
      });
      fs::create_directories(train_out);
      force::save_model(train_out / "model.bin", r.model);
      force::write_history_csv(train_out / "history.csv", r.history);
      data::save_split(train_out / "split.json", data::split_by_indenter(store.indenter, common.seed, common.folds),
                       common.seed);
      std::cout << "best epoch " << r.best_epoch << '\n';
    } else if (*eval_cmd) {
      const force::ForceNet model = force::load_model(eval_model);
      auto cfg = experiment_config(common, eval_sessions, force::kind_name(model.kind));
      cfg.width = model.width;
      cfg.height = model.height;
      const auto store = eval::load_store(cfg);
      const auto idx = fold_indices(store, common, fold);
      write_reports(eval_out, cfg.model, fold, store, idx.test, force::predict_store(model, store, idx.test));
    } else if (*base_cmd) {
      const auto store = eval::load_store(experiment_config(common, base_sessions, "poly"));
      const auto idx = fold_indices(store, common, fold);
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i : idx.train) pts.emplace_back(double(store.max_deformation(i)), store.force[i]);
      const force::PolyModel m = force::fit_poly_baseline(pts);
      std::vector<double> pred;
      for (std::size_t i : idx.test) pred.push_back(force::poly_eval(m, double(store.max_deformation(i))));
      fs::create_directories(base_out);
      force::save_poly(base_out / "poly.json", m);
      write_reports(base_out, "poly", fold, store, idx.test, pred);
    } else if (*exp_cmd) {
      const auto cfg = eval::load_config(config_path);
      const auto r = eval::run_experiment(cfg, eval::load_store(cfg), &std::cerr);
      std::cout << eval::summary_text(cfg.model, r);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
