#pragma once

#include "vtf/image.hpp"

#include <stdexcept>

namespace vtf {

/// Per-pixel unit surface normals.
///
/// Convention shared by calibration, rendering and reconstruction: for an
/// indentation depth field h (positive into the gel) the normal is
/// (-dh/dx, -dh/dy, 1) normalized, i.e. the outward normal of the indentation
/// cap as seen by the camera. n_z is positive.
struct NormalMap {
  FieldD nx;
  FieldD ny;
  FieldD nz;

  NormalMap() = default;
  NormalMap(int width, int height)
      : nx(FieldD::Zero(height, width)), ny(FieldD::Zero(height, width)), nz(FieldD::Ones(height, width)) {}

  int width() const { return int(nx.cols()); }
  int height() const { return int(nx.rows()); }

  static NormalMap flat(int width, int height) { return NormalMap(width, height); }

  /// Normals of a depth field from central differences (one-sided at the border).
  static NormalMap from_depth(const FieldD& h);
};

/// Angle in degrees between two unit normals at (x, y).
double angular_error_deg(const NormalMap& a, const NormalMap& b, int x, int y);

}  // namespace vtf
