#include "vtf/normals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vtf {

NormalMap NormalMap::from_depth(const FieldD& h) {
  const int rows = int(h.rows()), cols = int(h.cols());
  NormalMap n(cols, rows);
  for (int y = 0; y < rows; ++y) {
    const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, rows - 1);
    for (int x = 0; x < cols; ++x) {
      const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, cols - 1);
      const double hx = x1 > x0 ? (h(y, x1) - h(y, x0)) / double(x1 - x0) : 0.0;
      const double hy = y1 > y0 ? (h(y1, x) - h(y0, x)) / double(y1 - y0) : 0.0;
      const double inv = 1.0 / std::sqrt(hx * hx + hy * hy + 1.0);
      n.nx(y, x) = -hx * inv;
      n.ny(y, x) = -hy * inv;
      n.nz(y, x) = inv;
    }
  }
  return n;
}

double angular_error_deg(const NormalMap& a, const NormalMap& b, int x, int y) {
  const double dot = a.nx(y, x) * b.nx(y, x) + a.ny(y, x) * b.ny(y, x) + a.nz(y, x) * b.nz(y, x);
  return std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace vtf
