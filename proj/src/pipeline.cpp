#include "vtf/pipeline.hpp"

#include "vtf/dataio.hpp"
#include "vtf/nn/io.hpp"

#include <algorithm>
#include <limits>

namespace fs = std::filesystem;

namespace vtf::pipeline {

namespace {

/// Sensor frames arrive as 8-bit images; every path works from the quantized frame.
ImageF quantized(ImageF img) {
  for (Eigen::Index i = 0; i < img.data().size(); ++i) img.data()[i] = from_byte<float>(to_byte(img.data()[i]));
  return img;
}

fs::path resolve(const fs::path& dir, const std::string& p) {
  const fs::path path(p);
  return path.is_relative() ? dir / path : path;
}

}  // namespace

std::vector<SpherePress> synthetic_presses(const synth::CalibrationPressSpec& spec, std::uint64_t seed) {
  const auto scenes = synth::calibration_scenes(spec, seed);
  std::vector<SpherePress> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    ImageF frame = synth::render_tactile(synth::press_depth_map(s, spec.width, spec.height), spec.lights);
    synth::add_pixel_noise(frame, spec.noise_sigma, seed * 1000003ULL + i);
    out.push_back({s.center_px, s.indenter.radius, s.press_depth_px, quantized(std::move(frame))});
  }
  return out;
}

Calibration calibrate_synthetic(const synth::CalibrationPressSpec& spec, std::uint64_t seed,
                                const CalibrationConfig& cfg) {
  const ImageF reference =
      quantized(synth::render_tactile(FieldD::Zero(spec.height, spec.width), spec.lights));
  CalibrationResult r = calibrate(synthetic_presses(spec, seed), reference, cfg);
  Calibration c{std::move(r.mlp), {}, reference};
  c.scale.max_depth = r.max_depth;
  c.scale.calibrated_at = utc_timestamp();
  c.scale.mlp_weights = "mlp.weights";
  c.scale.reference_frame = "reference.png";
  return c;
}

void save_calibration(const fs::path& dir, const Calibration& c) {
  fs::create_directories(dir);
  ScaleRecord scale = c.scale;
  if (scale.mlp_weights.empty()) scale.mlp_weights = "mlp.weights";
  if (scale.reference_frame.empty()) scale.reference_frame = "reference.png";
  nn::save_weights(resolve(dir, scale.mlp_weights), c.mlp);
  save_image(c.reference, resolve(dir, scale.reference_frame));
  save_scale_record(dir / "scale.json", scale);
}

Calibration load_calibration(const fs::path& dir) {
  Calibration c;
  c.scale = load_scale_record(dir / "scale.json");
  if (c.scale.reference_frame.empty()) throw ReconstructionError(dir.string() + ": scale record has no reference frame");
  c.mlp = nn::load_weights(resolve(dir, c.scale.mlp_weights));
  c.reference = load_image(resolve(dir, c.scale.reference_frame));
  return c;
}

void write_sessions(const synth::SynthDataset& ds, const fs::path& root, const Calibration* calibration,
                    const ReconstructOptions& opt) {
  fs::create_directories(root);
  std::size_t i = 0;
  for (std::size_t k = 0; k < ds.spec.indenters.size(); ++k) {
    const std::string& id = ds.spec.indenters[k].id;
    data::SessionWriter w(root / id, id, "synthetic", "rendered press series");
    if (calibration) fs::create_directories(w.dir / "depth");
    for (; i < ds.samples.size() && ds.samples[i].indenter_index == k; ++i) {
      const auto& s = ds.samples[i];
      const ImageF frame = quantized(ds.frame(i));
      save_image(frame, w.add(s.timestamp_s, s.force_n));
      if (calibration)
        save_image(reconstruct(calibration->mlp, frame, calibration->reference, calibration->scale, opt).depth_image,
                   w.depth_path(s.timestamp_s));
    }
    w.finish();
  }
}

int reconstruct_sessions(const fs::path& root, const Calibration& c, const ReconstructOptions& opt) {
  data::IngestOptions all;
  all.force_min = -std::numeric_limits<double>::infinity();
  all.force_max = std::numeric_limits<double>::infinity();
  all.max_gap_s = std::numeric_limits<double>::infinity();
  int n = 0;
  for (const auto& s : data::ingest_sessions(root, all)) {
    const fs::path out = s.frame_path.parent_path().parent_path() / "depth" / s.frame_path.filename();
    fs::create_directories(out.parent_path());
    save_image(reconstruct(c.mlp, load_image(s.frame_path), c.reference, c.scale, opt).depth_image, out);
    ++n;
  }
  return n;
}

force::SampleStore build_store(const synth::SynthDataset& ds, const Calibration* calibration, int width, int height,
                               const ReconstructOptions& opt, const Progress& progress) {
  force::SampleStore store(width, height, true, calibration != nullptr);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const ImageF frame = quantized(ds.frame(i));
    if (calibration) {
      const ImageF depth =
          reconstruct(calibration->mlp, frame, calibration->reference, calibration->scale, opt).depth_image;
      store.add(&frame, &depth, s.force_n, ds.spec.indenters[s.indenter_index].id);
    } else {
      store.add(&frame, nullptr, s.force_n, ds.spec.indenters[s.indenter_index].id);
    }
    if (progress) progress(i + 1, ds.samples.size());
  }
  return store;
}

}  // namespace vtf::pipeline
