#pragma once

#include "vtf/image.hpp"

#include <stdexcept>

namespace vtf {

/// Per-pixel depth gradients (dH/dx, dH/dy).
struct GradientField {
  FieldD gx;
  FieldD gy;

  GradientField() = default;
  GradientField(FieldD gx_, FieldD gy_) : gx(std::move(gx_)), gy(std::move(gy_)) {
    if (gx.rows() != gy.rows() || gx.cols() != gy.cols())
      throw std::invalid_argument("GradientField: gx/gy dimension mismatch");
  }
  int width() const { return int(gx.cols()); }
  int height() const { return int(gx.rows()); }
};

/// Height field; rows are image rows. Boundary rows/columns are zero for solver output.
using DepthMap = FieldD;

class SolverError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Central-difference divergence dgx/dx + dgy/dy on interior pixels, as a
/// (height-2) x (width-2) field.
FieldD interior_divergence(const GradientField& g);

/// In-place unnormalized DST-I along each row of a row-major field:
///   out[m] = sum_{k=1..n} in[k] * sin(pi k m / (n + 1)),  m = 1..n.
/// Applying it twice scales by (n + 1) / 2.
void dst1_rows(FieldD& values);
void dst1_cols(FieldD& values);

/// Integrates a gradient field: solves the 5-point Laplacian system
/// lap(H) = div(g) with H = 0 on the image border. Spectral division in the
/// DST-I basis, eigenvalues 2cos(pi i/(nx+1)) + 2cos(pi j/(ny+1)) - 4 for the
/// nx x ny interior. Runs in O(N log N).
DepthMap dst_poisson_solve(const GradientField& g);

/// Same system assembled densely and solved by LU factorization. Reference
/// implementation for tests; limited to 64 x 64 images.
DepthMap dense_poisson_solve(const GradientField& g);

inline constexpr int kDenseSolverMaxSide = 64;

}  // namespace vtf
