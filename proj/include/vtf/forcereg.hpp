#pragma once

#include "vtf/image.hpp"
#include "vtf/nn/network.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtf::force {

class ModelError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// rgbmod: RGB with multi-level taps. d: depth image, final stage only.
/// dmod: depth with taps. rgbmod_d: an RGB and a depth backbone, both tapped,
/// fused in one head.
enum class ModelKind { RgbMod = 1, D = 2, DMod = 3, RgbModD = 4 };

const char* kind_name(ModelKind kind);
ModelKind parse_kind(const std::string& name);
bool uses_rgb(ModelKind kind);
bool uses_depth(ModelKind kind);
bool has_taps(ModelKind kind);

/// Backbone widths. Defaults give the desk-scale residual stack; tests shrink them.
struct ArchConfig {
  std::array<int, 4> stage_channels{16, 32, 64, 128};
  int head_hidden = 64;
};

/// Stem (4x4 stride-4 conv, ReLU), then four residual stages (stride 1, 2, 2, 2).
/// With taps, the outputs of stages 2, 3 and 4 are routed to the head;
/// without, the last stage is globally average-pooled.
std::vector<nn::LayerSpec> backbone_layers(int in_channels, bool taps, const ArchConfig& arch = {});

/// Branch inputs and head for a kind at a resolution (both divisible by 8).
std::vector<nn::BranchSpec> branch_specs(ModelKind kind, int width, int height, const ArchConfig& arch = {});
std::vector<nn::LayerSpec> head_layers(int features, const ArchConfig& arch = {});

struct ForceNet {
  ModelKind kind = ModelKind::RgbMod;
  int width = 0;
  int height = 0;
  nn::Network<float> net;
  /// Input standardization, fixed from the training set.
  std::array<float, 3> rgb_mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> rgb_std{1.0f, 1.0f, 1.0f};
  float depth_mean = 0.0f;
  float depth_std = 1.0f;
};

ForceNet build_model(ModelKind kind, int width, int height, std::uint64_t seed, const ArchConfig& arch = {});

/// Zeroes the head weights reading the given stage's tap (2, 3 or 4).
/// Returns false for kinds without taps, which are left unchanged.
bool ablate_tap(ForceNet& model, int stage);

/// Frames and depth images quantized to bytes, as they are stored on disk.
struct SampleStore {
  int width = 0;
  int height = 0;
  bool has_rgb = false;
  bool has_depth = false;
  std::vector<std::uint8_t> rgb;    // per sample h*w*3, interleaved
  std::vector<std::uint8_t> depth;  // per sample h*w
  std::vector<double> force;
  std::vector<std::string> indenter;

  SampleStore() = default;
  SampleStore(int width, int height, bool rgb, bool depth);

  std::size_t size() const { return force.size(); }
  /// Adds one sample, resizing images to the store's resolution.
  void add(const ImageF* frame, const ImageF* depth_image, double force_n, std::string indenter_id);
  ImageF frame(std::size_t i) const;
  ImageF depth_image(std::size_t i) const;
  /// Largest byte of the depth image: the maximum deformation value.
  std::uint8_t max_deformation(std::size_t i) const;
  std::vector<std::string> distinct_indenters() const;
};

struct TrainConfig {
  int batch_size = 64;
  double lr = 4e-5;
  int epochs = 25;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ForceNet model;  // weights of the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on mean squared error in newtons. Input statistics and the output bias
/// are set from the training samples before the first step. Deterministic for a seed.
TrainResult train(ForceNet model, const SampleStore& store, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

/// Predictions for store samples, evaluated in batches.
std::vector<double> predict_store(const ForceNet& model, const SampleStore& store,
                                  const std::vector<std::size_t>& indices, int batch_size = 64);

/// Single-frame force. Depth must be given exactly when the kind consumes it.
double predict_force(const ForceNet& model, const ImageF& frame, const std::optional<ImageF>& depth = std::nullopt);

/// Model file: "VTFM", version, kind, width, height, input statistics, then
/// the network in the weights format.
void save_model(const std::filesystem::path& path, const ForceNet& model);
ForceNet load_model(const std::filesystem::path& path);

/// Cubic map from the maximum deformation byte of a depth image to newtons.
struct PolyModel {
  std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};  // c0 + c1 x + c2 x^2 + c3 x^3
  double residual_rms = 0.0;
};

/// Least-squares cubic; needs at least four distinct abscissae.
PolyModel fit_poly_baseline(const std::vector<std::pair<double, double>>& samples);
double poly_eval(const PolyModel& model, double x);
/// Evaluates the cubic at the largest byte value of the depth image.
double poly_predict(const PolyModel& model, const ImageF& depth_image);

void save_poly(const std::filesystem::path& path, const PolyModel& model);
PolyModel load_poly(const std::filesystem::path& path);

}  // namespace vtf::force
