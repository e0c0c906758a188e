#include "vtf/poisson.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace vtf {

namespace {

void check_grid(const GradientField& g) {
  if (g.gx.rows() != g.gy.rows() || g.gx.cols() != g.gy.cols())
    throw SolverError("poisson: gx/gy dimension mismatch");
  if (g.width() < 3 || g.height() < 3)
    throw SolverError("poisson: grid must be at least 3x3, got " + std::to_string(g.width()) + "x" +
                      std::to_string(g.height()));
  if (!g.gx.allFinite() || !g.gy.allFinite()) throw SolverError("poisson: gradient field is not finite");
}

/// DST-I through an odd extension of length 2(n+1). Two real sequences share
/// one complex FFT: with z = a + ib, FFT(z) = -2i S(a) + 2 S(b).
class Dst1 {
public:
  explicit Dst1(int n) : n_(n), ext_(std::size_t(2 * (n + 1)), 0.0) {}

  void apply(double* a, double* b, Eigen::Index stride) {
    const int m = 2 * (n_ + 1);
    ext_[0] = 0.0;
    ext_[std::size_t(n_ + 1)] = 0.0;
    for (int k = 1; k <= n_; ++k) {
      const std::complex<double> z(a[(k - 1) * stride], b ? b[(k - 1) * stride] : 0.0);
      ext_[std::size_t(k)] = z;
      ext_[std::size_t(m - k)] = -z;
    }
    fft_.fwd(spec_, ext_);
    for (int k = 1; k <= n_; ++k) {
      a[(k - 1) * stride] = -0.5 * spec_[std::size_t(k)].imag();
      if (b) b[(k - 1) * stride] = 0.5 * spec_[std::size_t(k)].real();
    }
  }

private:
  int n_;
  std::vector<std::complex<double>> ext_;
  std::vector<std::complex<double>> spec_;
  Eigen::FFT<double> fft_;
};

}  // namespace

void dst1_rows(FieldD& values) {
  if (values.cols() == 0) return;
  Dst1 t(int(values.cols()));
  const Eigen::Index rows = values.rows(), cols = values.cols();
  for (Eigen::Index r = 0; r < rows; r += 2)
    t.apply(values.data() + r * cols, r + 1 < rows ? values.data() + (r + 1) * cols : nullptr, 1);
}

void dst1_cols(FieldD& values) {
  if (values.rows() == 0) return;
  Dst1 t(int(values.rows()));
  const Eigen::Index cols = values.cols();
  for (Eigen::Index c = 0; c < cols; c += 2)
    t.apply(values.data() + c, c + 1 < cols ? values.data() + c + 1 : nullptr, cols);
}

FieldD interior_divergence(const GradientField& g) {
  const Eigen::Index h = g.height(), w = g.width();
  return 0.5 * (g.gx.block(1, 2, h - 2, w - 2) - g.gx.block(1, 0, h - 2, w - 2)) +
         0.5 * (g.gy.block(2, 1, h - 2, w - 2) - g.gy.block(0, 1, h - 2, w - 2));
}

DepthMap dst_poisson_solve(const GradientField& g) {
  check_grid(g);
  const int nx = g.width() - 2;
  const int ny = g.height() - 2;
  FieldD f = interior_divergence(g);

  dst1_rows(f);
  dst1_cols(f);
  const double pi = std::numbers::pi;
  Eigen::ArrayXd lx(nx), ly(ny);
  for (int i = 0; i < nx; ++i) lx[i] = 2.0 * std::cos(pi * (i + 1) / (nx + 1)) - 2.0;
  for (int j = 0; j < ny; ++j) ly[j] = 2.0 * std::cos(pi * (j + 1) / (ny + 1)) - 2.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) f(j, i) /= lx[i] + ly[j];
  dst1_rows(f);
  dst1_cols(f);
  f *= (2.0 / (nx + 1)) * (2.0 / (ny + 1));

  DepthMap out = DepthMap::Zero(g.height(), g.width());
  out.block(1, 1, ny, nx) = f;
  return out;
}

DepthMap dense_poisson_solve(const GradientField& g) {
  check_grid(g);
  if (g.width() > kDenseSolverMaxSide || g.height() > kDenseSolverMaxSide)
    throw SolverError("dense_poisson_solve: grid larger than 64x64");
  const int nx = g.width() - 2;
  const int ny = g.height() - 2;
  const int n = nx * ny;
  const FieldD f = interior_divergence(g);

  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs(n);
  auto idx = [nx](int x, int y) { return y * nx + x; };
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const int p = idx(x, y);
      lap(p, p) = -4.0;
      if (x > 0) lap(p, idx(x - 1, y)) = 1.0;
      if (x + 1 < nx) lap(p, idx(x + 1, y)) = 1.0;
      if (y > 0) lap(p, idx(x, y - 1)) = 1.0;
      if (y + 1 < ny) lap(p, idx(x, y + 1)) = 1.0;
      rhs[p] = f(y, x);
    }
  }
  const Eigen::VectorXd u = lap.partialPivLu().solve(rhs);

  DepthMap out = DepthMap::Zero(g.height(), g.width());
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) out(y + 1, x + 1) = u[idx(x, y)];
  return out;
}

}  // namespace vtf
