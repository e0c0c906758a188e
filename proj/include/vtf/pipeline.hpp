#pragma once

#include "vtf/depthrecon.hpp"
#include "vtf/forcereg.hpp"
#include "vtf/synthgel.hpp"

#include <filesystem>
#include <functional>

namespace vtf::pipeline {

/// A fitted colour-to-normal model with its scale and reference frame.
struct Calibration {
  nn::Network<double> mlp;
  ScaleRecord scale;
  ImageF reference;
};

/// Renders the spherical calibration presses of a synthetic sensor.
std::vector<SpherePress> synthetic_presses(const synth::CalibrationPressSpec& spec, std::uint64_t seed);

/// Fits the calibration on freshly rendered presses. The reference frame is
/// the noiseless no-contact render.
Calibration calibrate_synthetic(const synth::CalibrationPressSpec& spec, std::uint64_t seed,
                                const CalibrationConfig& cfg = {});

void save_calibration(const std::filesystem::path& dir, const Calibration& c);
Calibration load_calibration(const std::filesystem::path& dir);

/// Writes one session per indenter under root in the on-disk dataset layout.
/// With a calibration, depth images are reconstructed alongside the frames.
void write_sessions(const synth::SynthDataset& ds, const std::filesystem::path& root,
                    const Calibration* calibration = nullptr, const ReconstructOptions& opt = {});

/// Adds depth/<frame>.png for every frame of every session under root.
int reconstruct_sessions(const std::filesystem::path& root, const Calibration& c, const ReconstructOptions& opt = {});

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// In-memory equivalent of write_sessions followed by load_store: frames and
/// reconstructed depth images quantized to bytes.
force::SampleStore build_store(const synth::SynthDataset& ds, const Calibration* calibration, int width, int height,
                               const ReconstructOptions& opt = {}, const Progress& progress = {});

}  // namespace vtf::pipeline
