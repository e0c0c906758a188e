#include "vtf/nn/network.hpp"

namespace vtf::nn {

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::GlobalAvgPool: return "globalavgpool";
    case LayerKind::ConcatTap: return "concat-tap";
    case LayerKind::Residual: return "residual";
  }
  return "unknown";
}

Shape output_shape(const LayerSpec& s, const Shape& in) {
  auto fail = [&](const std::string& why) -> Shape {
    throw ShapeError(std::string(kind_name(s.kind)) + " layer: " + why + " (input " + in.str() + ")");
  };
  switch (s.kind) {
    case LayerKind::Dense:
      if (in.height != 1 || in.width != 1) return fail("dense input must be a feature vector");
      if (s.in != in.channels) return fail("expects " + std::to_string(s.in) + " features");
      if (s.out < 1) return fail("units must be positive");
      return {s.out, 1, 1};
    case LayerKind::Conv2d:
    case LayerKind::Residual: {
      if (s.in != in.channels) return fail("expects " + std::to_string(s.in) + " channels");
      if (s.out < 1 || s.kernel < 1 || s.stride < 1 || s.padding < 0) return fail("invalid shape parameters");
      const int h = conv_out_size(in.height, s.kernel, s.stride, s.padding);
      const int w = conv_out_size(in.width, s.kernel, s.stride, s.padding);
      if (h < 1 || w < 1) return fail("kernel larger than padded input");
      return {s.out, h, w};
    }
    case LayerKind::Relu:
    case LayerKind::Tanh:
    case LayerKind::ConcatTap:
      return in;
    case LayerKind::MaxPool: {
      if (s.kernel < 1 || s.stride < 1) return fail("invalid pooling window");
      const int h = conv_out_size(in.height, s.kernel, s.stride, 0);
      const int w = conv_out_size(in.width, s.kernel, s.stride, 0);
      if (h < 1 || w < 1) return fail("window larger than input");
      return {in.channels, h, w};
    }
    case LayerKind::GlobalAvgPool:
      return {in.channels, 1, 1};
  }
  return fail("unknown kind");
}

std::vector<std::pair<int, int>> parameter_shapes(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Dense:
      return {{s.out, s.in}, {s.out, 1}};
    case LayerKind::Conv2d:
      return {{s.out, s.in * s.kernel * s.kernel}, {s.out, 1}};
    case LayerKind::Residual: {
      std::vector<std::pair<int, int>> shapes{{s.out, s.in * 9}, {s.out, 1}, {s.out, s.out * 9}, {s.out, 1}};
      if (residual_has_projection(s)) {
        shapes.push_back({s.out, s.in});
        shapes.push_back({s.out, 1});
      }
      return shapes;
    }
    default:
      return {};
  }
}

namespace detail {

std::uint64_t next_network_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

int branch_feature_width(const BranchSpec& branch) {
  if (branch.input.channels < 1 || branch.input.height < 1 || branch.input.width < 1)
    throw ShapeError("branch input shape must be positive, got " + branch.input.str());
  Shape shape = branch.input;
  int taps = 0;
  bool any_tap = false;
  for (const LayerSpec& s : branch.layers) {
    if (s.kind == LayerKind::ConcatTap) {
      taps += shape.channels;
      any_tap = true;
    }
    shape = output_shape(s, shape);
  }
  if (any_tap) return taps;
  if (shape.height != 1 || shape.width != 1)
    throw ShapeError("branch without taps must end in a feature vector, got " + shape.str());
  return shape.channels;
}

}  // namespace detail

}  // namespace vtf::nn
