#pragma once

#include "vtf/nn/layers.hpp"

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vtf::nn {

struct BranchSpec {
  Shape input;
  std::vector<LayerSpec> layers;
};

template <typename Scalar>
struct Branch {
  Shape input;
  std::vector<Layer<Scalar>> layers;
};

class CacheError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

namespace detail {
std::uint64_t next_network_id();

/// Validates a branch and returns its feature width: the summed tap channels,
/// or the final channel count when the branch has no taps.
int branch_feature_width(const BranchSpec& branch);
}  // namespace detail

/// A set of input branches feeding one head.
///
/// Each branch is a layer sequence. When a branch contains concat-tap layers,
/// its contribution to the head is the concatenation of the global-average-pooled
/// activations at every tap; otherwise it is the branch's final (1x1 spatial)
/// output. The head concatenates all branch features (branch order) and runs a
/// dense stack. An empty head passes the features through.
template <typename Scalar>
class Network {
public:
  Network() = default;

  Network(const std::vector<BranchSpec>& branches, const std::vector<LayerSpec>& head, std::uint64_t seed)
      : id_(detail::next_network_id()) {
    if (branches.empty()) throw ShapeError("Network: at least one branch required");
    std::mt19937_64 rng(seed);
    int features = 0;
    for (const BranchSpec& bs : branches) {
      features += detail::branch_feature_width(bs);
      Branch<Scalar> b{bs.input, {}};
      for (const LayerSpec& ls : bs.layers) b.layers.push_back(make_layer<Scalar>(ls, rng));
      branches_.push_back(std::move(b));
    }
    Shape shape{features, 1, 1};
    for (const LayerSpec& ls : head) {
      if (ls.kind == LayerKind::ConcatTap) throw ShapeError("Network: taps are not allowed in the head");
      shape = output_shape(ls, shape);
      head_.push_back(make_layer<Scalar>(ls, rng));
    }
    output_size_ = shape.channels;
  }

  /// Assembles a network from existing layers, validating specs and parameter shapes.
  Network(std::vector<Branch<Scalar>> branches, std::vector<Layer<Scalar>> head)
      : id_(detail::next_network_id()), branches_(std::move(branches)), head_(std::move(head)) {
    if (branches_.empty()) throw ShapeError("Network: at least one branch required");
    int features = 0;
    auto check_params = [](const Layer<Scalar>& l) {
      const auto shapes = parameter_shapes(l.spec);
      if (shapes.size() != l.params.size()) throw ShapeError("Network: parameter count mismatch");
      for (std::size_t i = 0; i < shapes.size(); ++i)
        if (l.params[i].rows() != shapes[i].first || l.params[i].cols() != shapes[i].second)
          throw ShapeError("Network: parameter shape mismatch");
    };
    for (const Branch<Scalar>& b : branches_) {
      BranchSpec bs{b.input, {}};
      for (const auto& l : b.layers) {
        check_params(l);
        bs.layers.push_back(l.spec);
      }
      features += detail::branch_feature_width(bs);
    }
    Shape shape{features, 1, 1};
    for (const auto& l : head_) {
      check_params(l);
      shape = output_shape(l.spec, shape);
    }
    output_size_ = shape.channels;
  }

  Network(const Network& o)
      : id_(detail::next_network_id()), branches_(o.branches_), head_(o.head_), output_size_(o.output_size_) {}
  Network& operator=(const Network& o) {
    if (this != &o) {
      branches_ = o.branches_;
      head_ = o.head_;
      output_size_ = o.output_size_;
      id_ = detail::next_network_id();
      version_ = 0;
    }
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const std::vector<Branch<Scalar>>& branches() const { return branches_; }
  const std::vector<Layer<Scalar>>& head() const { return head_; }
  int output_size() const { return output_size_; }
  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }

  std::vector<int> feature_widths() const {
    std::vector<int> widths;
    for (const auto& b : branches_) {
      BranchSpec bs{b.input, {}};
      for (const auto& l : b.layers) bs.layers.push_back(l.spec);
      widths.push_back(detail::branch_feature_width(bs));
    }
    return widths;
  }

  /// Parameters in canonical order: branch by branch, layer by layer, then the head.
  std::vector<const Mat<Scalar>*> parameters() const {
    std::vector<const Mat<Scalar>*> out;
    for (const auto& b : branches_)
      for (const auto& l : b.layers)
        for (const auto& p : l.params) out.push_back(&p);
    for (const auto& l : head_)
      for (const auto& p : l.params) out.push_back(&p);
    return out;
  }

  /// Mutable view; invalidates outstanding forward caches.
  std::vector<Mat<Scalar>*> mutable_parameters() {
    ++version_;
    std::vector<Mat<Scalar>*> out;
    for (auto& b : branches_)
      for (auto& l : b.layers)
        for (auto& p : l.params) out.push_back(&p);
    for (auto& l : head_)
      for (auto& p : l.params) out.push_back(&p);
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    auto add = [&out](const std::string& prefix, const Layer<Scalar>& l, std::size_t i) {
      for (std::size_t p = 0; p < l.params.size(); ++p)
        out.push_back(prefix + ".layer" + std::to_string(i) + "(" + kind_name(l.spec.kind) + ").param" +
                      std::to_string(p));
    };
    for (std::size_t b = 0; b < branches_.size(); ++b)
      for (std::size_t i = 0; i < branches_[b].layers.size(); ++i)
        add("branch" + std::to_string(b), branches_[b].layers[i], i);
    for (std::size_t i = 0; i < head_.size(); ++i) add("head", head_[i], i);
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  template <typename Other>
  Network<Other> cast() const {
    std::vector<Branch<Other>> bs;
    for (const auto& b : branches_) {
      Branch<Other> nb{b.input, {}};
      for (const auto& l : b.layers) nb.layers.push_back(l.template cast<Other>());
      bs.push_back(std::move(nb));
    }
    std::vector<Layer<Other>> hs;
    for (const auto& l : head_) hs.push_back(l.template cast<Other>());
    return Network<Other>(std::move(bs), std::move(hs));
  }

  /// Mutable access to one branch layer for ablations and hand-set weights.
  Layer<Scalar>& branch_layer(std::size_t branch, std::size_t index) {
    ++version_;
    return branches_.at(branch).layers.at(index);
  }
  Layer<Scalar>& head_layer(std::size_t index) {
    ++version_;
    return head_.at(index);
  }

private:
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
  std::vector<Branch<Scalar>> branches_;
  std::vector<Layer<Scalar>> head_;
  int output_size_ = 0;
};

template <typename Scalar>
struct LayerRun {
  std::vector<Tensor<Scalar>> acts;  // acts[i] feeds layer i; acts.back() is the output
  std::vector<LayerCache<Scalar>> caches;
};

template <typename Scalar>
struct ForwardCache {
  std::uint64_t network_id = 0;
  std::uint64_t version = 0;
  std::vector<LayerRun<Scalar>> branches;
  LayerRun<Scalar> head;
};

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> output;
  ForwardCache<Scalar> cache;
};

/// Gradients in the network's canonical parameter order.
template <typename Scalar>
using Gradients = std::vector<Mat<Scalar>>;

namespace detail {

template <typename Scalar>
void check_input(const Branch<Scalar>& b, const Tensor<Scalar>& x, std::size_t index) {
  if (x.channels() != b.input.channels || x.height != b.input.height || x.width != b.input.width ||
      x.data.cols() != Eigen::Index(x.batch) * x.height * x.width)
    throw ShapeError("forward: input " + std::to_string(index) + " has shape " + std::to_string(x.channels()) +
                     "x" + std::to_string(x.height) + "x" + std::to_string(x.width) + ", expected " +
                     b.input.str());
}

template <typename Scalar>
Tensor<Scalar> run_branch(const Branch<Scalar>& b, const Tensor<Scalar>& x, LayerRun<Scalar>* run) {
  std::vector<Tensor<Scalar>> taps;
  Tensor<Scalar> cur = x;
  LayerCache<Scalar> scratch;
  if (run) {
    run->acts.clear();
    run->caches.assign(b.layers.size(), {});
    run->acts.reserve(b.layers.size() + 1);
  }
  for (std::size_t i = 0; i < b.layers.size(); ++i) {
    const Layer<Scalar>& layer = b.layers[i];
    if (layer.spec.kind == LayerKind::ConcatTap) taps.push_back(global_avg_pool(cur));
    Tensor<Scalar> next = layer_forward(layer, cur, run ? run->caches[i] : scratch);
    if (run) run->acts.push_back(std::move(cur));
    cur = std::move(next);
  }
  if (run) run->acts.push_back(cur);
  if (taps.empty()) return cur;
  int rows = 0;
  for (const auto& t : taps) rows += t.channels();
  Tensor<Scalar> features(rows, x.batch);
  int r = 0;
  for (const auto& t : taps) {
    features.data.middleRows(r, t.channels()) = t.data;
    r += t.channels();
  }
  return features;
}

template <typename Scalar>
Tensor<Scalar> run_head(const std::vector<Layer<Scalar>>& head, Tensor<Scalar> x, LayerRun<Scalar>* run) {
  LayerCache<Scalar> scratch;
  if (run) {
    run->acts.clear();
    run->caches.assign(head.size(), {});
  }
  for (std::size_t i = 0; i < head.size(); ++i) {
    Tensor<Scalar> next = layer_forward(head[i], x, run ? run->caches[i] : scratch);
    if (run) run->acts.push_back(std::move(x));
    x = std::move(next);
  }
  if (run) run->acts.push_back(x);
  return x;
}

template <typename Scalar>
Tensor<Scalar> concat_features(const std::vector<Tensor<Scalar>>& parts) {
  int rows = 0;
  for (const auto& p : parts) rows += p.channels();
  Tensor<Scalar> out(rows, parts.front().batch);
  int r = 0;
  for (const auto& p : parts) {
    out.data.middleRows(r, p.channels()) = p.data;
    r += p.channels();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> evaluate(const Network<Scalar>& net, const std::vector<Tensor<Scalar>>& inputs,
                        ForwardCache<Scalar>* cache) {
  const auto& branches = net.branches();
  if (inputs.size() != branches.size())
    throw ShapeError("forward: expected " + std::to_string(branches.size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  for (std::size_t b = 0; b < branches.size(); ++b) {
    check_input(branches[b], inputs[b], b);
    if (inputs[b].batch != inputs[0].batch) throw ShapeError("forward: branch batch sizes differ");
  }
  if (cache) {
    cache->network_id = net.id();
    cache->version = net.version();
    cache->branches.assign(branches.size(), {});
  }
  std::vector<Tensor<Scalar>> features;
  for (std::size_t b = 0; b < branches.size(); ++b)
    features.push_back(run_branch(branches[b], inputs[b], cache ? &cache->branches[b] : nullptr));
  Tensor<Scalar> joined = features.size() == 1 ? std::move(features.front()) : concat_features(features);
  return run_head(net.head(), std::move(joined), cache ? &cache->head : nullptr);
}

}  // namespace detail

/// Runs the network and keeps everything backward needs.
template <typename Scalar>
ForwardResult<Scalar> forward(const Network<Scalar>& net, const std::vector<Tensor<Scalar>>& inputs) {
  ForwardResult<Scalar> r;
  r.output = detail::evaluate(net, inputs, &r.cache);
  return r;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const Network<Scalar>& net, const Tensor<Scalar>& input) {
  return forward(net, std::vector<Tensor<Scalar>>{input});
}

/// Inference-only pass; same arithmetic as forward without retaining activations.
template <typename Scalar>
Tensor<Scalar> predict(const Network<Scalar>& net, const std::vector<Tensor<Scalar>>& inputs) {
  return detail::evaluate<Scalar>(net, inputs, nullptr);
}

template <typename Scalar>
Tensor<Scalar> predict(const Network<Scalar>& net, const Tensor<Scalar>& input) {
  return detail::evaluate<Scalar>(net, std::vector<Tensor<Scalar>>{input}, nullptr);
}

template <typename Scalar>
Gradients<Scalar> zero_gradients(const Network<Scalar>& net) {
  Gradients<Scalar> g;
  for (const auto* p : net.parameters()) g.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
  return g;
}

/// Backpropagates loss_grad (shaped like the forward output) through the cached pass.
template <typename Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net, const ForwardCache<Scalar>& cache,
                           const Tensor<Scalar>& loss_grad) {
  if (cache.network_id != net.id() || cache.version != net.version())
    throw CacheError("backward: cache does not belong to the current network state");
  const auto& branches = net.branches();
  if (cache.branches.size() != branches.size() || cache.head.acts.size() != net.head().size() + 1)
    throw CacheError("backward: cache structure mismatch");
  const Tensor<Scalar>& out = cache.head.acts.back();
  if (loss_grad.data.rows() != out.data.rows() || loss_grad.data.cols() != out.data.cols())
    throw ShapeError("backward: loss gradient shape mismatch");

  Gradients<Scalar> grads = zero_gradients(net);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& b : branches) {
    offsets.push_back(offset);
    for (const auto& l : b.layers) offset += l.params.size();
  }
  const std::size_t head_offset = offset;

  auto layer_grads = [&grads](std::size_t first, std::size_t count) {
    std::vector<Mat<Scalar>> view;
    view.reserve(count);
    for (std::size_t i = 0; i < count; ++i) view.push_back(std::move(grads[first + i]));
    return view;
  };
  auto restore = [&grads](std::size_t first, std::vector<Mat<Scalar>>& view) {
    for (std::size_t i = 0; i < view.size(); ++i) grads[first + i] = std::move(view[i]);
  };

  // Head.
  Tensor<Scalar> g = loss_grad;
  {
    std::vector<std::size_t> starts;
    std::size_t s = head_offset;
    for (const auto& l : net.head()) {
      starts.push_back(s);
      s += l.params.size();
    }
    for (std::size_t i = net.head().size(); i-- > 0;) {
      const auto& layer = net.head()[i];
      auto view = layer_grads(starts[i], layer.params.size());
      g = layer_backward(layer, cache.head.acts[i], cache.head.acts[i + 1], cache.head.caches[i], g, view);
      restore(starts[i], view);
    }
  }

  // Branches.
  int row = 0;
  const std::vector<int> widths = net.feature_widths();
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const Branch<Scalar>& branch = branches[b];
    const LayerRun<Scalar>& run = cache.branches[b];
    const Tensor<Scalar> g_feat_full = g;
    Tensor<Scalar> g_feat;
    g_feat.batch = g.batch;
    g_feat.data = g_feat_full.data.middleRows(row, widths[b]);
    row += widths[b];

    bool has_taps = false;
    for (const auto& l : branch.layers) has_taps |= l.spec.kind == LayerKind::ConcatTap;

    const Tensor<Scalar>& last = run.acts.back();
    Tensor<Scalar> cur;
    if (has_taps) {
      cur = Tensor<Scalar>(last.channels(), last.batch, last.height, last.width);
    } else {
      cur = g_feat;
      cur.height = last.height;
      cur.width = last.width;
    }

    // Taps consume feature rows in forward order; walk them from the end.
    int tap_row = widths[b];
    std::vector<std::size_t> starts;
    std::size_t s = offsets[b];
    for (const auto& l : branch.layers) {
      starts.push_back(s);
      s += l.params.size();
    }
    for (std::size_t i = branch.layers.size(); i-- > 0;) {
      const Layer<Scalar>& layer = branch.layers[i];
      if (layer.spec.kind == LayerKind::ConcatTap) {
        const int c = run.acts[i].channels();
        tap_row -= c;
        Tensor<Scalar> g_tap(c, g.batch);
        g_tap.data = g_feat.data.middleRows(tap_row, c);
        global_avg_pool_backward_add(g_tap, cur);
        continue;
      }
      auto view = layer_grads(starts[i], layer.params.size());
      // Nothing upstream of the first layer needs a gradient.
      cur = layer_backward(layer, run.acts[i], run.acts[i + 1], run.caches[i], cur, view, i > 0);
      restore(starts[i], view);
    }
  }
  return grads;
}

/// Mean squared error over every output element and its gradient.
template <typename Scalar>
std::pair<double, Tensor<Scalar>> mse_loss(const Tensor<Scalar>& prediction, const Mat<Scalar>& target) {
  if (prediction.data.rows() != target.rows() || prediction.data.cols() != target.cols())
    throw ShapeError("mse_loss: prediction/target shape mismatch");
  const Mat<Scalar> diff = prediction.data - target;
  const double n = double(diff.size());
  Tensor<Scalar> grad = prediction;
  grad.data = diff * Scalar(2.0 / n);
  return {diff.template cast<double>().squaredNorm() / n, std::move(grad)};
}

}  // namespace vtf::nn
