#pragma once

#include "vtf/calib.hpp"
#include "vtf/image.hpp"
#include "vtf/nn/network.hpp"
#include "vtf/normals.hpp"
#include "vtf/poisson.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vtf {

class ReconstructionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kMinNormalZ = 0.05;
inline constexpr double kDefaultMaskThreshold = 0.04;

/// Evaluates the colour-to-normal model on every pixel. Raw outputs get n_z
/// clamped to at least 0.05 and are then normalized.
NormalMap infer_normals(const nn::Network<double>& mlp, const ImageF& frame);

/// gx = n_x / n_z, gy = n_y / n_z.
GradientField normals_to_gradients(const NormalMap& n);

/// Global depth scale fixed at calibration time.
struct ScaleRecord {
  double max_depth = 0.0;
  std::string calibrated_at;    // ISO-8601 UTC
  std::string mlp_weights;      // path of the colour-to-normal weights
  std::string reference_frame;  // no-contact frame used for masking; may be empty
};

/// Current time as ISO-8601 UTC, for ScaleRecord::calibrated_at.
std::string utc_timestamp();

void save_scale_record(const std::filesystem::path& path, const ScaleRecord& s);
ScaleRecord load_scale_record(const std::filesystem::path& path);

/// d = clamp(h / max_depth, 0, 1) as a one-channel image.
ImageF depth_to_image(const DepthMap& h, const ScaleRecord& scale);

/// Pixels whose largest per-channel difference from the reference exceeds the
/// threshold, followed by a 3x3 morphological opening.
ContactMask contact_mask_from_diff(const ImageF& frame, const ImageF& reference, double threshold);

/// 3x3 erosion / dilation; pixels outside the grid count as false.
ContactMask erode3(const ContactMask& m);
ContactMask dilate3(const ContactMask& m);

/// Sets every false region not 4-connected to the border to true.
ContactMask fill_holes(const ContactMask& m);

/// Zeroes every pixel of a one-channel image outside the mask.
ImageF apply_contact_mask(const ImageF& d, const ContactMask& m);

/// Height field from a frame: normals, gradients, Poisson integration. The
/// solver returns -h for the camera-facing normal convention, so the result is
/// negated to give depth positive into the gel.
DepthMap reconstruct_height(const nn::Network<double>& mlp, const ImageF& frame);

struct ReconstructOptions {
  double mask_threshold = kDefaultMaskThreshold;
  /// Flat contact faces shade like the reference, leaving holes in the
  /// difference mask; filling them keeps plateaus in the depth image.
  bool fill_mask_holes = true;
};

struct Reconstruction {
  DepthMap height;
  ContactMask mask;
  ImageF depth_image;  // masked, scaled, one channel
};

/// Contact mask used by the pipeline: difference mask, optionally hole-filled.
ContactMask pipeline_mask(const ImageF& frame, const ImageF& reference, const ReconstructOptions& opt);

Reconstruction reconstruct(const nn::Network<double>& mlp, const ImageF& frame, const ImageF& reference,
                           const ScaleRecord& scale, const ReconstructOptions& opt = {});

/// Training of the colour-to-normal MLP: 5 -> hidden (tanh) -> hidden (tanh) -> 3.
struct CalibrationConfig {
  int hidden = 64;
  int epochs = 150;
  int batch_size = 256;
  double lr = 2e-3;
  std::uint64_t seed = 1;
  double mask_threshold = kDefaultMaskThreshold;
  double percentile = 99.0;
};

struct CalibrationResult {
  nn::Network<double> mlp;
  double max_depth = 0.0;
  std::vector<double> loss_history;  // mean training MSE per epoch
};

nn::Network<double> make_normal_mlp(int hidden, std::uint64_t seed);

/// Fits the MLP on the presses and fixes the global depth scale as the given
/// percentile of pooled in-mask reconstructed heights over the same presses.
CalibrationResult calibrate(const std::vector<SpherePress>& presses, const ImageF& reference,
                            const CalibrationConfig& cfg = {});

/// Linear-interpolation percentile of a sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace vtf
