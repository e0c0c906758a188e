#include "vtf/synthgel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vtf::synth {

namespace {

constexpr double kPi = std::numbers::pi;

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

/// Distance from (x, y) to the star polygon, zero inside.
double star_outside_distance(const Indenter& ind, double x, double y) {
  const int n = 2 * ind.arms;
  double best = std::numeric_limits<double>::infinity();
  bool inside = false;
  auto vertex = [&](int i) {
    const double r = (i % 2 == 0) ? ind.radius : ind.radius * ind.inner_ratio;
    const double a = -kPi / 2 + kPi * i / ind.arms;
    return Eigen::Vector2d(r * std::cos(a), r * std::sin(a));
  };
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const Eigen::Vector2d a = vertex(i), b = vertex(j);
    if (((a.y() > y) != (b.y() > y)) && (x < (b.x() - a.x()) * (y - a.y()) / (b.y() - a.y()) + a.x()))
      inside = !inside;
    best = std::min(best, segment_distance(x, y, a.x(), a.y(), b.x(), b.y()));
  }
  return inside ? 0.0 : best;
}

double gel_surface(double x, double apex_x, double curvature_radius) {
  if (curvature_radius <= 0) return 0.0;
  const double dx = x - apex_x;
  const double r2 = curvature_radius * curvature_radius - dx * dx;
  if (r2 <= 0) return -curvature_radius;
  return std::sqrt(r2) - curvature_radius;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::Sphere: return "sphere";
    case Shape::Box: return "box";
    case Shape::Cylinder: return "cylinder";
    case Shape::Cone: return "cone";
    case Shape::StarPrism: return "star-prism";
  }
  return "unknown";
}

Shape parse_shape(const std::string& name) {
  for (Shape s : {Shape::Sphere, Shape::Box, Shape::Cylinder, Shape::Cone, Shape::StarPrism})
    if (name == shape_name(s)) return s;
  throw std::invalid_argument("unknown indenter shape: " + name);
}

Indenter Indenter::sphere(std::string id, double radius) {
  Indenter i;
  i.shape = Shape::Sphere;
  i.id = std::move(id);
  i.radius = radius;
  return i;
}

Indenter Indenter::box(std::string id, double half_x, double half_y) {
  Indenter i;
  i.shape = Shape::Box;
  i.id = std::move(id);
  i.half_x = half_x;
  i.half_y = half_y;
  i.radius = std::hypot(half_x, half_y);
  return i;
}

Indenter Indenter::cylinder(std::string id, double radius) {
  Indenter i;
  i.shape = Shape::Cylinder;
  i.id = std::move(id);
  i.radius = radius;
  return i;
}

Indenter Indenter::cone(std::string id, double base_radius, double slope) {
  Indenter i;
  i.shape = Shape::Cone;
  i.id = std::move(id);
  i.radius = base_radius;
  i.slope = slope;
  return i;
}

Indenter Indenter::star(std::string id, double outer_radius, double inner_ratio, int arms) {
  Indenter i;
  i.shape = Shape::StarPrism;
  i.id = std::move(id);
  i.radius = outer_radius;
  i.inner_ratio = inner_ratio;
  i.arms = arms;
  return i;
}

void Indenter::validate() const {
  if (!(radius > 0)) throw std::invalid_argument("indenter " + id + ": radius must be positive");
  if (shape == Shape::Box && !(half_x > 0 && half_y > 0))
    throw std::invalid_argument("indenter " + id + ": box half sizes must be positive");
  if (shape == Shape::Cone && !(slope > 0)) throw std::invalid_argument("indenter " + id + ": cone slope must be positive");
  if (shape == Shape::StarPrism && (arms < 3 || !(inner_ratio > 0 && inner_ratio < 1)))
    throw std::invalid_argument("indenter " + id + ": invalid star parameters");
  if (!(edge_slope > 0)) throw std::invalid_argument("indenter " + id + ": edge slope must be positive");
}

double Indenter::profile(double dx, double dy) const {
  const double r = std::hypot(dx, dy);
  switch (shape) {
    case Shape::Sphere:
      if (r <= radius) return radius - std::sqrt(radius * radius - r * r);
      return radius + (r - radius) * 1e3;
    case Shape::Box: {
      const double ox = std::max(std::abs(dx) - half_x, 0.0);
      const double oy = std::max(std::abs(dy) - half_y, 0.0);
      return edge_slope * std::hypot(ox, oy);
    }
    case Shape::Cylinder:
      return edge_slope * std::max(r - radius, 0.0);
    case Shape::Cone:
      return r <= radius ? slope * r : slope * radius + (r - radius) * 1e3;
    case Shape::StarPrism:
      return edge_slope * star_outside_distance(*this, dx, dy);
  }
  return 0.0;
}

double Indenter::face_area() const {
  switch (shape) {
    case Shape::Box: return 4.0 * half_x * half_y;
    case Shape::Cylinder: return kPi * radius * radius;
    case Shape::StarPrism: return arms * radius * (radius * inner_ratio) * std::sin(kPi / arms);
    default: return 0.0;
  }
}

double Indenter::reach(double depth) const {
  switch (shape) {
    case Shape::Sphere: return radius;
    case Shape::Cone: return std::min(radius, depth / slope);
    default: return radius + depth / edge_slope;
  }
}

FieldD press_depth_map(const PressScene& scene, int width, int height) {
  scene.indenter.validate();
  if (width < 3 || height < 3) throw std::invalid_argument("press_depth_map: grid must be at least 3x3");
  if (scene.press_depth_px < 0) throw std::invalid_argument("press_depth_map: negative press depth");
  FieldD h = FieldD::Zero(height, width);
  if (scene.press_depth_px == 0) return h;

  const double apex_x = 0.5 * (width - 1);
  const double cx = scene.center_px.x(), cy = scene.center_px.y();
  const double g_center = gel_surface(cx, apex_x, scene.gel_curvature_radius);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double drop = g_center - gel_surface(x, apex_x, scene.gel_curvature_radius);
      double v = scene.press_depth_px - scene.indenter.profile(x - cx, y - cy) - drop;
      if (v <= 0) continue;
      if (scene.saturation_depth > 0) v = std::min(v, scene.saturation_depth);
      h(y, x) = v;
    }
  }
  const bool touches_border = (h.row(0) > 0).any() || (h.row(height - 1) > 0).any() || (h.col(0) > 0).any() ||
                              (h.col(width - 1) > 0).any();
  if (touches_border)
    throw std::invalid_argument("press_depth_map: indenter " + scene.indenter.id + " contact leaves the frame");
  return h;
}

LightingModel LightingModel::tri_color() {
  LightingModel m;
  const double el = kPi / 4;
  const std::array<Eigen::Vector3d, 3> colors{Eigen::Vector3d(0.5, 0.04, 0.04), Eigen::Vector3d(0.04, 0.5, 0.04),
                                              Eigen::Vector3d(0.04, 0.04, 0.5)};
  for (int i = 0; i < 3; ++i) {
    const double az = 2.0 * kPi * i / 3.0;
    m.lights[i].direction = Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    m.lights[i].intensity = colors[i];
  }
  return m;
}

void LightingModel::validate() const {
  for (const Light& l : lights) {
    if (std::abs(l.direction.norm() - 1.0) > 1e-9) throw std::invalid_argument("LightingModel: light direction not unit");
    if ((l.intensity.array() < 0).any()) throw std::invalid_argument("LightingModel: negative intensity");
  }
  if ((ambient.array() < 0).any()) throw std::invalid_argument("LightingModel: negative ambient");
}

ImageF render_tactile(const FieldD& h, const LightingModel& lights) {
  lights.validate();
  const NormalMap n = NormalMap::from_depth(h);
  const int width = int(h.cols()), height = int(h.rows());
  ImageF img(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d normal(n.nx(y, x), n.ny(y, x), n.nz(y, x));
      Eigen::Vector3d c = lights.ambient;
      for (const Light& l : lights.lights) c += l.intensity * std::max(0.0, l.direction.dot(normal));
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = float(std::clamp(c[ch], 0.0, 1.0));
    }
  }
  return img;
}

void add_pixel_noise(ImageF& img, double sigma, std::uint64_t seed) {
  if (sigma <= 0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index i = 0; i < img.data().size(); ++i)
    img.data()[i] = float(std::clamp(double(img.data()[i]) + noise(rng), 0.0, 1.0));
}

double contact_force(const PressScene& scene, const ForceConstants& k) {
  const double d = scene.press_depth_px;
  if (d <= 0) return 0.0;
  const Indenter& ind = scene.indenter;
  switch (ind.shape) {
    case Shape::Sphere: return k.k_sphere * std::sqrt(ind.radius) * std::pow(d, 1.5);
    case Shape::Box:
    case Shape::Cylinder: return k.k_flat * ind.face_area() * d;
    case Shape::Cone: return k.k_cone / ind.slope * d * d;
    case Shape::StarPrism: return k.k_cone * (ind.face_area() / 100.0) * d * d;
  }
  return 0.0;
}

double depth_for_force(const Indenter& ind, double force_n, const ForceConstants& k) {
  if (force_n <= 0) return 0.0;
  switch (ind.shape) {
    case Shape::Sphere: return std::pow(force_n / (k.k_sphere * std::sqrt(ind.radius)), 2.0 / 3.0);
    case Shape::Box:
    case Shape::Cylinder: return force_n / (k.k_flat * ind.face_area());
    case Shape::Cone: return std::sqrt(force_n * ind.slope / k.k_cone);
    case Shape::StarPrism: return std::sqrt(force_n / (k.k_cone * ind.face_area() / 100.0));
  }
  return 0.0;
}

std::vector<Indenter> standard_indenters(double scale) {
  std::vector<Indenter> out;
  const std::array<std::pair<const char*, double>, 2> scales{{{"s", 1.0}, {"l", 1.4}}};
  for (const auto& [tag, s0] : scales) {
    const double s = s0 * scale;
    const std::string t = tag;
    out.push_back(Indenter::sphere("sphere_" + t, 8 * s));
    out.push_back(Indenter::sphere("dome_" + t, 14 * s));
    out.push_back(Indenter::cylinder("cylinder_" + t, 6 * s));
    out.push_back(Indenter::box("square_" + t, 5 * s, 5 * s));
    out.push_back(Indenter::box("rect_" + t, 8 * s, 3.5 * s));
    out.push_back(Indenter::cone("cone_" + t, 14 * s, 0.7 / s0));
    out.push_back(Indenter::cone("blunt_cone_" + t, 16 * s, 0.35 / s0));
    out.push_back(Indenter::star("star5_" + t, 8 * s, 0.5, 5));
    out.push_back(Indenter::star("cross4_" + t, 8 * s, 0.45, 4));
  }
  return out;
}

std::vector<Eigen::Vector2d> standard_locations(int width, int height) {
  std::vector<Eigen::Vector2d> out;
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= 3; ++i) {
      const bool corner = (i != 2) && (j != 2);
      if (!corner) out.emplace_back(std::round(width * i / 4.0), std::round(height * j / 4.0));
    }
  return out;
}

ImageF SynthDataset::reference() const {
  return render_tactile(FieldD::Zero(spec.height, spec.width), spec.lights);
}

FieldD SynthDataset::depth(std::size_t i) const {
  return press_depth_map(samples.at(i).scene, spec.width, spec.height);
}

ImageF SynthDataset::frame(std::size_t i) const {
  ImageF img = render_tactile(depth(i), spec.lights);
  add_pixel_noise(img, spec.noise_sigma, samples[i].noise_seed);
  return img;
}

SynthDataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.indenters.empty()) throw std::invalid_argument("generate_dataset: no indenters");
  if (spec.locations.empty()) throw std::invalid_argument("generate_dataset: no press locations");
  if (spec.presses_per_location < 1) throw std::invalid_argument("generate_dataset: presses_per_location < 1");
  if (!(spec.force_min > 0 && spec.force_max >= spec.force_min))
    throw std::invalid_argument("generate_dataset: invalid force range");
  spec.lights.validate();

  SynthDataset ds;
  ds.spec = spec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> force_dist(spec.force_min, spec.force_max);
  for (std::size_t k = 0; k < spec.indenters.size(); ++k) {
    spec.indenters[k].validate();
    int in_session = 0;
    for (const Eigen::Vector2d& loc : spec.locations) {
      for (int p = 0; p < spec.presses_per_location; ++p) {
        SynthSample s;
        s.indenter_index = k;
        s.force_n = force_dist(rng);
        s.scene.indenter = spec.indenters[k];
        s.scene.center_px = loc;
        s.scene.press_depth_px = depth_for_force(spec.indenters[k], s.force_n, spec.constants);
        s.scene.gel_curvature_radius = spec.gel_curvature_radius;
        s.scene.saturation_depth = spec.saturation_depth;
        s.noise_seed = mix_seed(seed, ds.samples.size());
        s.timestamp_s = in_session++ / 60.0;
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

std::vector<PressScene> calibration_scenes(const CalibrationPressSpec& spec, std::uint64_t seed) {
  if (spec.count < 1) throw std::invalid_argument("calibration_scenes: count < 1");
  if (!(spec.min_depth_px > 0 && spec.max_depth_px >= spec.min_depth_px && spec.max_depth_px <= spec.radius_px))
    throw std::invalid_argument("calibration_scenes: depths must satisfy 0 < min <= max <= radius");
  const double margin = spec.radius_px + 2.0;
  if (spec.width <= 2 * margin || spec.height <= 2 * margin)
    throw std::invalid_argument("calibration_scenes: sphere does not fit the frame");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(margin, spec.width - 1 - margin);
  std::uniform_real_distribution<double> uy(margin, spec.height - 1 - margin);
  std::uniform_real_distribution<double> ud(spec.min_depth_px, spec.max_depth_px);
  std::vector<PressScene> out;
  for (int i = 0; i < spec.count; ++i) {
    PressScene s;
    s.indenter = Indenter::sphere("calibration_sphere", spec.radius_px);
    s.center_px = Eigen::Vector2d(ux(rng), uy(rng));
    s.press_depth_px = ud(rng);
    out.push_back(s);
  }
  return out;
}

}  // namespace vtf::synth
