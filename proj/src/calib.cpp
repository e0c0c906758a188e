#include "vtf/calib.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace vtf {

SphereNormals sphere_normals(const Eigen::Vector2d& center_px, double radius_px, double press_depth_px, int width,
                             int height) {
  if (!(press_depth_px > 0)) throw CalibrationError("sphere_normals: press depth must be positive");
  if (!(radius_px > 0) || press_depth_px > radius_px)
    throw CalibrationError("sphere_normals: require 0 < depth <= radius");
  if (width < 1 || height < 1) throw CalibrationError("sphere_normals: empty grid");

  const double R = radius_px;
  const double contact = std::sqrt(R * R - (R - press_depth_px) * (R - press_depth_px));
  SphereNormals out{NormalMap::flat(width, height), ContactMask::Constant(height, width, false)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - center_px.x(), dy = y - center_px.y();
      const double r = std::hypot(dx, dy);
      if (r >= contact) continue;
      const double s = std::sqrt(R * R - r * r);
      const double inv = 1.0 / std::sqrt(dx * dx + dy * dy + s * s);
      out.normals.nx(y, x) = dx * inv;
      out.normals.ny(y, x) = dy * inv;
      out.normals.nz(y, x) = s * inv;
      out.mask(y, x) = true;
    }
  }
  return out;
}

SphereNormals sphere_normals(const SpherePress& press) {
  return sphere_normals(press.center_px, press.radius_px, press.press_depth_px, press.frame.width(),
                        press.frame.height());
}

CalibrationSet build_calibration_set(const std::vector<SpherePress>& presses) {
  if (presses.empty()) throw CalibrationError("build_calibration_set: no presses");
  const int w = presses.front().frame.width(), h = presses.front().frame.height();
  std::vector<SphereNormals> truth;
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < presses.size(); ++i) {
    const ImageF& f = presses[i].frame;
    if (f.width() != w || f.height() != h || f.channels() != 3)
      throw CalibrationError("build_calibration_set: frame " + std::to_string(i) + " is " +
                             std::to_string(f.width()) + "x" + std::to_string(f.height()) + "x" +
                             std::to_string(f.channels()) + ", expected " + std::to_string(w) + "x" +
                             std::to_string(h) + "x3");
    truth.push_back(sphere_normals(presses[i]));
    total += truth.back().mask.count();
  }

  CalibrationSet set;
  set.inputs.resize(5, total);
  set.targets.resize(3, total);
  set.press_count = int(presses.size());
  set.width = w;
  set.height = h;
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < presses.size(); ++i) {
    const ImageF& f = presses[i].frame;
    const SphereNormals& t = truth[i];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!t.mask(y, x)) continue;
        set.inputs.col(k) << f.at(x, y, 0), f.at(x, y, 1), f.at(x, y, 2), normalized_coord(x, w),
            normalized_coord(y, h);
        set.targets.col(k) << t.normals.nx(y, x), t.normals.ny(y, x), t.normals.nz(y, x);
        ++k;
      }
    }
  }
  return set;
}

std::vector<PressRecord> read_press_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CalibrationError("cannot open press records: " + path.string());
  std::vector<PressRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PressRecord r;
      r.frame = j.at("frame").get<std::string>();
      const auto& c = j.at("center_px");
      if (!c.is_array() || c.size() != 2) throw CalibrationError("center_px must be [x, y]");
      r.center_px = {c[0].get<double>(), c[1].get<double>()};
      r.radius_px = j.at("radius_px").get<double>();
      r.press_depth_px = j.at("press_depth_px").get<double>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw CalibrationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_press_records(const std::filesystem::path& path, const std::vector<PressRecord>& records) {
  std::ofstream out(path);
  if (!out) throw CalibrationError("cannot write press records: " + path.string());
  for (const PressRecord& r : records) {
    nlohmann::json j;
    j["frame"] = r.frame;
    j["center_px"] = {r.center_px.x(), r.center_px.y()};
    j["radius_px"] = r.radius_px;
    j["press_depth_px"] = r.press_depth_px;
    out << j.dump() << '\n';
  }
  if (!out) throw CalibrationError("failed writing press records: " + path.string());
}

std::vector<SpherePress> load_presses(const std::filesystem::path& path) {
  const auto dir = path.parent_path();
  std::vector<SpherePress> out;
  for (const PressRecord& r : read_press_records(path)) {
    SpherePress p;
    p.center_px = r.center_px;
    p.radius_px = r.radius_px;
    p.press_depth_px = r.press_depth_px;
    p.frame = load_image(dir / r.frame);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace vtf
