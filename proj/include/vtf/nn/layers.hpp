#pragma once

#include "vtf/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace vtf::nn {

/// One layer: its architecture plus parameter blocks. Weights come first,
/// then biases; residual layers hold {W1, b1, W2, b2[, Wproj, bproj]}.
template <typename Scalar>
struct Layer {
  LayerSpec spec;
  std::vector<Mat<Scalar>> params;

  template <typename Other>
  Layer<Other> cast() const {
    Layer<Other> out{spec, {}};
    for (const auto& p : params) out.params.push_back(p.template cast<Other>());
    return out;
  }
};

template <typename Scalar>
struct LayerCache {
  std::vector<Tensor<Scalar>> saved;
  Eigen::Array<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
};

inline int conv_out_size(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

inline bool residual_has_projection(const LayerSpec& s) { return s.stride != 1 || s.in != s.out; }

/// Output shape of a layer, validating the input against the spec.
Shape output_shape(const LayerSpec& spec, const Shape& in);

/// Expected parameter block shapes (rows, cols) for a spec.
std::vector<std::pair<int, int>> parameter_shapes(const LayerSpec& spec);

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
template <typename Scalar>
Layer<Scalar> make_layer(const LayerSpec& spec, std::mt19937_64& rng) {
  Layer<Scalar> layer{spec, {}};
  for (auto [rows, cols] : parameter_shapes(spec)) {
    Mat<Scalar> p = Mat<Scalar>::Zero(rows, cols);
    if (cols > 1) {
      const double bound = std::sqrt(6.0 / double(cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = Scalar(dist(rng));
    }
    layer.params.push_back(std::move(p));
  }
  return layer;
}

// ---------------------------------------------------------------------------
// Convolution through im2col: rows of the column matrix run over
// (in_channel, ky, kx), columns over (sample, oy, ox). Batches are processed in
// sample chunks so the column buffer stays cache-resident.

/// Writes the columns of samples [n0, n1) into `col` (resized as needed).
template <typename Scalar>
void im2col_range(const Tensor<Scalar>& in, int k, int stride, int pad, int out_h, int out_w, int n0, int n1,
                  Mat<Scalar>& col) {
  const int channels = in.channels();
  const Eigen::Index out_plane = Eigen::Index(out_h) * out_w;
  col.resize(Eigen::Index(channels) * k * k, (n1 - n0) * out_plane);
  for (int c = 0; c < channels; ++c) {
    const Scalar* src = in.data.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = col.row((Eigen::Index(c) * k + ky) * k + kx).data();
        // Output columns whose input column lies inside the image.
        const int ox_lo = std::clamp((pad - kx + stride - 1) / stride, 0, out_w);
        const int hi_num = in.width - 1 + pad - kx;
        const int ox_hi = hi_num < 0 ? ox_lo : std::clamp(hi_num / stride + 1, ox_lo, out_w);
        const int off = kx - pad;
        for (int n = n0; n < n1; ++n) {
          const Scalar* plane = src + n * in.plane();
          Scalar* out = dst + (n - n0) * out_plane;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ky - pad;
            Scalar* row = out + Eigen::Index(oy) * out_w;
            if (iy < 0 || iy >= in.height) {
              std::fill(row, row + out_w, Scalar(0));
              continue;
            }
            const Scalar* in_row = plane + Eigen::Index(iy) * in.width;
            std::fill(row, row + ox_lo, Scalar(0));
            if (stride == 1) {
              std::copy(in_row + ox_lo + off, in_row + ox_hi + off, row + ox_lo);
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) row[ox] = in_row[ox * stride + off];
            }
            std::fill(row + ox_hi, row + out_w, Scalar(0));
          }
        }
      }
    }
  }
}

template <typename Scalar>
Mat<Scalar> im2col(const Tensor<Scalar>& in, int k, int stride, int pad, int out_h, int out_w) {
  Mat<Scalar> col;
  im2col_range(in, k, stride, pad, out_h, out_w, 0, in.batch, col);
  return col;
}

/// Scatter-adds the columns of samples [n0, n1) back into grad_in.
template <typename Scalar>
void col2im_range(const Mat<Scalar>& col, int k, int stride, int pad, int out_h, int out_w, int n0, int n1,
                  Tensor<Scalar>& grad_in) {
  const int channels = grad_in.channels();
  const Eigen::Index out_plane = Eigen::Index(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    Scalar* dst = grad_in.data.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = col.row((Eigen::Index(c) * k + ky) * k + kx).data();
        const int ox_lo = std::clamp((pad - kx + stride - 1) / stride, 0, out_w);
        const int hi_num = grad_in.width - 1 + pad - kx;
        const int ox_hi = hi_num < 0 ? ox_lo : std::clamp(hi_num / stride + 1, ox_lo, out_w);
        const int off = kx - pad;
        for (int n = n0; n < n1; ++n) {
          Scalar* plane = dst + n * grad_in.plane();
          const Scalar* g = src + (n - n0) * out_plane;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= grad_in.height) continue;
            Scalar* in_row = plane + Eigen::Index(iy) * grad_in.width;
            const Scalar* g_row = g + Eigen::Index(oy) * out_w;
            for (int ox = ox_lo; ox < ox_hi; ++ox) in_row[ox * stride + off] += g_row[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Mat<Scalar>& col, int k, int stride, int pad, int out_h, int out_w, Tensor<Scalar>& grad_in) {
  col2im_range(col, k, stride, pad, out_h, out_w, 0, grad_in.batch, grad_in);
}

namespace detail {
/// Samples per im2col chunk, targeting roughly 1 MiB of column data.
template <typename Scalar>
int conv_chunk(Eigen::Index col_rows, Eigen::Index out_plane) {
  const Eigen::Index per_sample = std::max<Eigen::Index>(1, col_rows * out_plane * Eigen::Index(sizeof(Scalar)));
  return int(std::max<Eigen::Index>(1, (Eigen::Index(1) << 20) / per_sample));
}
}  // namespace detail

template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& in, const Mat<Scalar>& weight, const Mat<Scalar>& bias,
                            int k, int stride, int pad) {
  const int out_h = conv_out_size(in.height, k, stride, pad);
  const int out_w = conv_out_size(in.width, k, stride, pad);
  Tensor<Scalar> out;
  out.batch = in.batch;
  out.height = out_h;
  out.width = out_w;
  if (k == 1 && stride == 1 && pad == 0) {
    out.data.noalias() = weight * in.data;
  } else {
    const Eigen::Index out_plane = Eigen::Index(out_h) * out_w;
    out.data.resize(weight.rows(), in.batch * out_plane);
    const int chunk = detail::conv_chunk<Scalar>(weight.cols(), out_plane);
    Mat<Scalar> col;
    for (int n0 = 0; n0 < in.batch; n0 += chunk) {
      const int n1 = std::min(in.batch, n0 + chunk);
      im2col_range(in, k, stride, pad, out_h, out_w, n0, n1, col);
      out.data.middleCols(n0 * out_plane, (n1 - n0) * out_plane).noalias() = weight * col;
    }
  }
  out.data.colwise() += bias.col(0);
  return out;
}

/// Accumulates weight/bias gradients and returns the input gradient, or an
/// empty tensor when `input_grad` is false.
template <typename Scalar>
Tensor<Scalar> conv_backward(const Tensor<Scalar>& in, const Tensor<Scalar>& grad_out, const Mat<Scalar>& weight,
                             int k, int stride, int pad, Mat<Scalar>& grad_w, Mat<Scalar>& grad_b,
                             bool input_grad = true) {
  grad_b.col(0) += grad_out.data.rowwise().sum();
  Tensor<Scalar> grad_in;
  if (input_grad) grad_in = Tensor<Scalar>(in.channels(), in.batch, in.height, in.width);
  if (k == 1 && stride == 1 && pad == 0) {
    grad_w.noalias() += grad_out.data * in.data.transpose();
    if (input_grad) grad_in.data.noalias() = weight.transpose() * grad_out.data;
    return grad_in;
  }
  const Eigen::Index out_plane = grad_out.plane();
  const int chunk = detail::conv_chunk<Scalar>(weight.cols(), out_plane);
  Mat<Scalar> col, grad_col;
  for (int n0 = 0; n0 < in.batch; n0 += chunk) {
    const int n1 = std::min(in.batch, n0 + chunk);
    const auto g = grad_out.data.middleCols(n0 * out_plane, (n1 - n0) * out_plane);
    im2col_range(in, k, stride, pad, grad_out.height, grad_out.width, n0, n1, col);
    grad_w.noalias() += g * col.transpose();
    if (!input_grad) continue;
    grad_col.noalias() = weight.transpose() * g;
    col2im_range(grad_col, k, stride, pad, grad_out.height, grad_out.width, n0, n1, grad_in);
  }
  return grad_in;
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& in) {
  Tensor<Scalar> out;
  out.data = in.data.cwiseMax(Scalar(0));
  out.batch = in.batch;
  out.height = in.height;
  out.width = in.width;
  return out;
}

/// Gradient through a ReLU given its output.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& out, const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> g;
  g.data = (out.data.array() > Scalar(0)).template cast<Scalar>().matrix().cwiseProduct(grad_out.data);
  g.batch = grad_out.batch;
  g.height = grad_out.height;
  g.width = grad_out.width;
  return g;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& in) {
  Tensor<Scalar> out(in.channels(), in.batch);
  const Eigen::Index plane = in.plane();
  for (int n = 0; n < in.batch; ++n)
    out.data.col(n) = in.data.middleCols(n * plane, plane).rowwise().mean();
  return out;
}

template <typename Scalar>
void global_avg_pool_backward_add(const Tensor<Scalar>& grad_out, Tensor<Scalar>& grad_in) {
  const Eigen::Index plane = grad_in.plane();
  const Scalar inv = Scalar(1) / Scalar(plane);
  for (int n = 0; n < grad_in.batch; ++n)
    grad_in.data.middleCols(n * plane, plane).colwise() += grad_out.data.col(n) * inv;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> layer_forward(const Layer<Scalar>& layer, const Tensor<Scalar>& in, LayerCache<Scalar>& cache) {
  const LayerSpec& s = layer.spec;
  switch (s.kind) {
    case LayerKind::Dense: {
      Tensor<Scalar> out;
      out.batch = in.batch;
      out.data.noalias() = layer.params[0] * in.data;
      out.data.colwise() += layer.params[1].col(0);
      return out;
    }
    case LayerKind::Conv2d:
      return conv_forward(in, layer.params[0], layer.params[1], s.kernel, s.stride, s.padding);
    case LayerKind::Relu:
      return relu_forward(in);
    case LayerKind::Tanh: {
      Tensor<Scalar> out = in;
      out.data = in.data.array().tanh().matrix();
      return out;
    }
    case LayerKind::MaxPool: {
      const int out_h = conv_out_size(in.height, s.kernel, s.stride, 0);
      const int out_w = conv_out_size(in.width, s.kernel, s.stride, 0);
      Tensor<Scalar> out(in.channels(), in.batch, out_h, out_w);
      cache.argmax.resize(out.data.rows(), out.data.cols());
      for (int c = 0; c < in.channels(); ++c) {
        for (int n = 0; n < in.batch; ++n) {
          for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
              Scalar best = -std::numeric_limits<Scalar>::infinity();
              Eigen::Index best_idx = 0;
              for (int ky = 0; ky < s.kernel; ++ky) {
                for (int kx = 0; kx < s.kernel; ++kx) {
                  const Eigen::Index idx =
                      n * in.plane() + Eigen::Index(oy * s.stride + ky) * in.width + (ox * s.stride + kx);
                  const Scalar v = in.data(c, idx);
                  if (v > best) {
                    best = v;
                    best_idx = idx;
                  }
                }
              }
              const Eigen::Index o = n * out.plane() + Eigen::Index(oy) * out_w + ox;
              out.data(c, o) = best;
              cache.argmax(c, o) = best_idx;
            }
          }
        }
      }
      return out;
    }
    case LayerKind::GlobalAvgPool:
      return global_avg_pool(in);
    case LayerKind::ConcatTap:
      return in;
    case LayerKind::Residual: {
      cache.saved.clear();
      Tensor<Scalar> a = conv_forward(in, layer.params[0], layer.params[1], 3, s.stride, 1);
      Tensor<Scalar> r = relu_forward(a);
      Tensor<Scalar> c = conv_forward(r, layer.params[2], layer.params[3], 3, 1, 1);
      if (residual_has_projection(s))
        c.data += conv_forward(in, layer.params[4], layer.params[5], 1, s.stride, 0).data;
      else
        c.data += in.data;
      cache.saved.push_back(std::move(r));
      return relu_forward(c);
    }
  }
  throw ShapeError("layer_forward: unknown layer kind");
}

/// Accumulates parameter gradients into grads (shaped like layer.params) and
/// returns the gradient with respect to the layer input. With `input_grad`
/// false a convolution skips that gradient and returns an empty tensor.
template <typename Scalar>
Tensor<Scalar> layer_backward(const Layer<Scalar>& layer, const Tensor<Scalar>& in, const Tensor<Scalar>& out,
                              const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                              std::vector<Mat<Scalar>>& grads, bool input_grad = true) {
  const LayerSpec& s = layer.spec;
  switch (s.kind) {
    case LayerKind::Dense: {
      grads[0].noalias() += grad_out.data * in.data.transpose();
      grads[1].col(0) += grad_out.data.rowwise().sum();
      Tensor<Scalar> g;
      g.batch = in.batch;
      g.data.noalias() = layer.params[0].transpose() * grad_out.data;
      return g;
    }
    case LayerKind::Conv2d:
      return conv_backward(in, grad_out, layer.params[0], s.kernel, s.stride, s.padding, grads[0], grads[1],
                           input_grad);
    case LayerKind::Relu:
      return relu_backward(out, grad_out);
    case LayerKind::Tanh: {
      Tensor<Scalar> g = grad_out;
      g.data = (grad_out.data.array() * (Scalar(1) - out.data.array().square())).matrix();
      return g;
    }
    case LayerKind::MaxPool: {
      Tensor<Scalar> g(in.channels(), in.batch, in.height, in.width);
      for (Eigen::Index c = 0; c < grad_out.data.rows(); ++c)
        for (Eigen::Index o = 0; o < grad_out.data.cols(); ++o) g.data(c, cache.argmax(c, o)) += grad_out.data(c, o);
      return g;
    }
    case LayerKind::GlobalAvgPool: {
      Tensor<Scalar> g(in.channels(), in.batch, in.height, in.width);
      global_avg_pool_backward_add(grad_out, g);
      return g;
    }
    case LayerKind::ConcatTap:
      return grad_out;
    case LayerKind::Residual: {
      const Tensor<Scalar>& r = cache.saved.at(0);
      const Tensor<Scalar> g_pre = relu_backward(out, grad_out);
      Tensor<Scalar> g_r = conv_backward(r, g_pre, layer.params[2], 3, 1, 1, grads[2], grads[3]);
      const Tensor<Scalar> g_a = relu_backward(r, g_r);
      Tensor<Scalar> g_in = conv_backward(in, g_a, layer.params[0], 3, s.stride, 1, grads[0], grads[1]);
      if (residual_has_projection(s))
        g_in.data += conv_backward(in, g_pre, layer.params[4], 1, s.stride, 0, grads[4], grads[5]).data;
      else
        g_in.data += g_pre.data;
      return g_in;
    }
  }
  throw ShapeError("layer_backward: unknown layer kind");
}

}  // namespace vtf::nn
