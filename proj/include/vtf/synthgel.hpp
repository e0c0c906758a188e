#pragma once

#include "vtf/image.hpp"
#include "vtf/normals.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace vtf::synth {

enum class Shape { Sphere, Box, Cylinder, Cone, StarPrism };

const char* shape_name(Shape s);
Shape parse_shape(const std::string& name);

/// Rigid indenter. Lengths are in pixels of the simulated sensor.
///
/// Flat-faced shapes (box, cylinder, star prism) carry an edge chamfer so the
/// pressed height field stays continuous; the chamfer rises `edge_slope`
/// pixels of height per pixel of distance outside the footprint.
struct Indenter {
  Shape shape = Shape::Sphere;
  std::string id;
  double radius = 10.0;        // sphere / cylinder / cone base / star outer radius
  double half_x = 0.0;         // box
  double half_y = 0.0;         // box
  double slope = 0.6;          // cone flank rise per pixel
  double inner_ratio = 0.5;    // star inner/outer radius
  int arms = 5;                // star
  double edge_slope = 1.0;     // flat-face chamfer

  static Indenter sphere(std::string id, double radius);
  static Indenter box(std::string id, double half_x, double half_y);
  static Indenter cylinder(std::string id, double radius);
  static Indenter cone(std::string id, double base_radius, double slope);
  static Indenter star(std::string id, double outer_radius, double inner_ratio, int arms);

  /// Height of the indenter's lower surface above its lowest point at offset (dx, dy).
  double profile(double dx, double dy) const;
  /// Footprint area of the flat face (box, cylinder, star); zero otherwise.
  double face_area() const;
  /// Radius beyond which the indenter cannot touch at the given depth.
  double reach(double depth) const;
  void validate() const;
};

struct PressScene {
  Indenter indenter;
  Eigen::Vector2d center_px{0.0, 0.0};
  double press_depth_px = 0.0;
  /// Cylindrical gel curvature about the frame's vertical centre line; 0 = flat.
  double gel_curvature_radius = 0.0;
  /// Clamp on the penetration field; 0 disables saturation.
  double saturation_depth = 0.0;
};

/// Penetration of the indenter into the gel surface, clamped at zero.
/// Throws std::invalid_argument when the contact region touches the frame border.
FieldD press_depth_map(const PressScene& scene, int width, int height);

struct Light {
  Eigen::Vector3d direction;  // unit, pointing from the surface toward the light
  Eigen::Vector3d intensity;  // RGB
};

struct LightingModel {
  std::array<Light, 3> lights;
  Eigen::Vector3d ambient{0.15, 0.15, 0.15};

  /// Red, green and blue lights at azimuths 0, 120, 240 degrees and 45 degrees elevation.
  static LightingModel tri_color();
  void validate() const;
};

/// Lambertian shading of the indentation normals (central differences of h).
ImageF render_tactile(const FieldD& h, const LightingModel& lights);

/// Adds N(0, sigma) per channel and clamps to [0,1].
void add_pixel_noise(ImageF& img, double sigma, std::uint64_t seed);

/// Per-shape force constants. Forces follow
///   sphere:           k_sphere * sqrt(R) * d^{3/2}
///   box, cylinder:    k_flat * area * d
///   cone:             k_cone / slope * d^2
///   star prism:       k_cone * (area / 100) * d^2
struct ForceConstants {
  double k_sphere = 0.424;
  double k_flat = 0.025;
  double k_cone = 0.36;
};

double contact_force(const PressScene& scene, const ForceConstants& k = {});
/// Depth producing the given force (inverse of contact_force for the indenter).
double depth_for_force(const Indenter& ind, double force_n, const ForceConstants& k = {});

struct DatasetSpec {
  std::vector<Indenter> indenters;
  std::vector<Eigen::Vector2d> locations;
  int presses_per_location = 10;
  double force_min = 1.0;
  double force_max = 15.0;
  int width = 160;
  int height = 120;
  LightingModel lights = LightingModel::tri_color();
  double noise_sigma = 0.01;
  double gel_curvature_radius = 0.0;
  double saturation_depth = 0.0;
  ForceConstants constants;
};

/// Eighteen indenters: nine geometries at two scales.
std::vector<Indenter> standard_indenters(double scale = 1.0);

/// 3x3 grid of press points at quarter positions minus the four corners.
std::vector<Eigen::Vector2d> standard_locations(int width, int height);

struct SynthSample {
  PressScene scene;
  double force_n = 0.0;
  std::size_t indenter_index = 0;
  std::uint64_t noise_seed = 0;
  double timestamp_s = 0.0;
};

/// Scene records for a dataset; frames are rendered on demand from the records,
/// which keeps thirteen thousand samples cheap to hold.
struct SynthDataset {
  DatasetSpec spec;
  std::vector<SynthSample> samples;

  ImageF reference() const;
  FieldD depth(std::size_t i) const;
  ImageF frame(std::size_t i) const;
};

/// Forces uniform in [force_min, force_max], one record per
/// (indenter, location, press), in that nesting order. Deterministic per seed.
SynthDataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Spherical calibration presses of a known radius at random positions/depths.
struct CalibrationPressSpec {
  int count = 40;
  double radius_px = 12.0;
  double min_depth_px = 1.0;
  double max_depth_px = 6.0;
  int width = 160;
  int height = 120;
  LightingModel lights = LightingModel::tri_color();
  double noise_sigma = 0.01;
};

std::vector<PressScene> calibration_scenes(const CalibrationPressSpec& spec, std::uint64_t seed);

}  // namespace vtf::synth
