#pragma once

#include "vtf/image.hpp"
#include "vtf/nn/tensor.hpp"
#include "vtf/normals.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtf {

class CalibrationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A frame of a sphere of known radius pressed into the gel.
struct SpherePress {
  Eigen::Vector2d center_px{0.0, 0.0};
  double radius_px = 0.0;
  double press_depth_px = 0.0;
  ImageF frame;
};

struct SphereNormals {
  NormalMap normals;
  ContactMask mask;
};

/// Ground-truth normals of a sphere cap on a width x height grid.
///
/// Inside the contact circle r < c, c = sqrt(R^2 - (R - d)^2), the normal at
/// offset (dx, dy) from the centre is (dx, dy, sqrt(R^2 - r^2)) / R: azimuth
/// atan2(dy, dx), elevation asin(sqrt(R^2 - r^2) / R). Outside it is (0, 0, 1).
SphereNormals sphere_normals(const Eigen::Vector2d& center_px, double radius_px, double press_depth_px, int width,
                             int height);

/// Same, on the grid of press.frame.
SphereNormals sphere_normals(const SpherePress& press);

/// Training pairs for the colour-to-normal model, stored column-wise:
/// inputs rows (r, g, b, x/(W-1), y/(H-1)), targets rows (nx, ny, nz).
struct CalibrationSet {
  nn::Mat<double> inputs;
  nn::Mat<double> targets;
  int press_count = 0;
  int width = 0;
  int height = 0;

  Eigen::Index size() const { return inputs.cols(); }
};

/// Normalized pixel coordinate used as a model input; a one-pixel axis maps to 0.
inline double normalized_coord(int v, int extent) { return extent > 1 ? double(v) / double(extent - 1) : 0.0; }

/// One record per in-mask pixel, in press order then row-major order.
CalibrationSet build_calibration_set(const std::vector<SpherePress>& presses);

/// One line of a press record file (JSON Lines).
struct PressRecord {
  std::string frame;  // relative to the record file's directory
  Eigen::Vector2d center_px{0.0, 0.0};
  double radius_px = 0.0;
  double press_depth_px = 0.0;
};

std::vector<PressRecord> read_press_records(const std::filesystem::path& path);
void write_press_records(const std::filesystem::path& path, const std::vector<PressRecord>& records);

/// Reads the record file and loads every referenced frame.
std::vector<SpherePress> load_presses(const std::filesystem::path& path);

}  // namespace vtf
