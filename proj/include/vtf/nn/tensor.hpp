#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace vtf::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Activation block stored channel-major: rows are channels, columns run over
/// (sample, y, x) with x fastest. Feature vectors are tensors with height = width = 1.
template <typename Scalar>
struct Tensor {
  Mat<Scalar> data;
  int batch = 0;
  int height = 1;
  int width = 1;

  Tensor() = default;
  Tensor(int channels, int batch_, int height_ = 1, int width_ = 1)
      : data(Mat<Scalar>::Zero(channels, Eigen::Index(batch_) * height_ * width_)),
        batch(batch_), height(height_), width(width_) {}

  int channels() const { return int(data.rows()); }
  Eigen::Index plane() const { return Eigen::Index(height) * width; }

  Scalar& at(int c, int n, int y, int x) { return data(c, (n * plane()) + Eigen::Index(y) * width + x); }
  Scalar at(int c, int n, int y, int x) const { return data(c, (n * plane()) + Eigen::Index(y) * width + x); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.data = data.template cast<Other>();
    out.batch = batch;
    out.height = height;
    out.width = width;
    return out;
  }
};

struct Shape {
  int channels = 0;
  int height = 1;
  int width = 1;
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class LayerKind : int {
  Dense = 1,
  Conv2d = 2,
  Relu = 3,
  Tanh = 4,
  MaxPool = 5,
  GlobalAvgPool = 6,
  ConcatTap = 7,
  Residual = 8,
};

const char* kind_name(LayerKind kind);

/// Architecture description of one layer. Fields unused by a kind stay zero.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int in = 0;
  int out = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  static LayerSpec dense(int in, int units) { return {LayerKind::Dense, in, units, 0, 1, 0}; }
  static LayerSpec conv2d(int in, int out, int kernel, int stride = 1, int padding = 0) {
    return {LayerKind::Conv2d, in, out, kernel, stride, padding};
  }
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec tanh() { return {LayerKind::Tanh}; }
  static LayerSpec maxpool(int kernel, int stride) { return {LayerKind::MaxPool, 0, 0, kernel, stride, 0}; }
  static LayerSpec global_avg_pool() { return {LayerKind::GlobalAvgPool}; }
  /// Routes the global-average-pooled activation at this point to the head.
  static LayerSpec concat_tap() { return {LayerKind::ConcatTap}; }
  /// Two 3x3 convolutions with a shortcut; a 1x1 projection replaces the identity
  /// when the stride or channel count changes.
  static LayerSpec residual(int in, int out, int stride) { return {LayerKind::Residual, in, out, 3, stride, 1}; }

  bool operator==(const LayerSpec&) const = default;
};

}  // namespace vtf::nn
