#include "vtf/forcereg.hpp"

#include "vtf/nn/adam.hpp"
#include "vtf/nn/io.hpp"
#include "vtf/text.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace vtf::force {

namespace {

using nn::LayerSpec;

/// Activation buffers are tens of megabytes; keeping them on the heap instead
/// of fresh mappings avoids page-fault churn on every batch.
void tune_allocator() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1024 << 20);
  });
#endif
}

/// Feature offsets of each tap in head-input order, per branch.
std::vector<std::vector<std::pair<int, int>>> tap_ranges(const nn::Network<float>& net) {
  std::vector<std::vector<std::pair<int, int>>> out;
  int offset = 0;
  const auto widths = net.feature_widths();
  for (std::size_t b = 0; b < net.branches().size(); ++b) {
    std::vector<std::pair<int, int>> taps;
    int channels = net.branches()[b].input.channels;
    int local = offset;
    for (const auto& layer : net.branches()[b].layers) {
      if (layer.spec.kind == nn::LayerKind::ConcatTap) {
        taps.emplace_back(local, channels);
        local += channels;
      } else if (layer.spec.kind == nn::LayerKind::Conv2d || layer.spec.kind == nn::LayerKind::Residual ||
                 layer.spec.kind == nn::LayerKind::Dense) {
        channels = layer.spec.out;
      }
    }
    out.push_back(std::move(taps));
    offset += widths[b];
  }
  return out;
}

struct InputTables {
  std::array<std::array<float, 256>, 3> rgb;
  std::array<float, 256> depth;
};

InputTables make_tables(const ForceNet& m) {
  InputTables t;
  for (int v = 0; v < 256; ++v) {
    const float x = from_byte<float>(std::uint8_t(v));
    for (int c = 0; c < 3; ++c) t.rgb[c][v] = (x - m.rgb_mean[c]) / m.rgb_std[c];
    t.depth[v] = (x - m.depth_mean) / m.depth_std;
  }
  return t;
}

std::vector<nn::Tensor<float>> make_inputs(const ForceNet& m, const InputTables& t, const SampleStore& s,
                                           const std::size_t* idx, int n) {
  const int w = m.width, h = m.height;
  const Eigen::Index plane = Eigen::Index(w) * h;
  std::vector<nn::Tensor<float>> out;
  if (uses_rgb(m.kind)) {
    nn::Tensor<float> x(3, n, h, w);
    for (int i = 0; i < n; ++i) {
      const std::uint8_t* src = s.rgb.data() + idx[i] * std::size_t(plane) * 3;
      for (int c = 0; c < 3; ++c) {
        float* dst = x.data.row(c).data() + i * plane;
        for (Eigen::Index p = 0; p < plane; ++p) dst[p] = t.rgb[c][src[p * 3 + c]];
      }
    }
    out.push_back(std::move(x));
  }
  if (uses_depth(m.kind)) {
    nn::Tensor<float> x(1, n, h, w);
    for (int i = 0; i < n; ++i) {
      const std::uint8_t* src = s.depth.data() + idx[i] * std::size_t(plane);
      float* dst = x.data.row(0).data() + i * plane;
      for (Eigen::Index p = 0; p < plane; ++p) dst[p] = t.depth[src[p]];
    }
    out.push_back(std::move(x));
  }
  return out;
}

void check_store(const ForceNet& m, const SampleStore& s) {
  if (s.width != m.width || s.height != m.height)
    throw ModelError("sample store is " + std::to_string(s.width) + "x" + std::to_string(s.height) +
                     ", model expects " + std::to_string(m.width) + "x" + std::to_string(m.height));
  if (uses_rgb(m.kind) && !s.has_rgb) throw ModelError(std::string(kind_name(m.kind)) + " needs RGB frames");
  if (uses_depth(m.kind) && !s.has_depth) throw ModelError(std::string(kind_name(m.kind)) + " needs depth images");
}

void set_statistics(ForceNet& m, const SampleStore& s, const std::vector<std::size_t>& idx) {
  const std::size_t plane = std::size_t(s.width) * std::size_t(s.height);
  if (uses_rgb(m.kind)) {
    std::array<std::array<double, 256>, 3> hist{};
    for (std::size_t i : idx) {
      const std::uint8_t* src = s.rgb.data() + i * plane * 3;
      for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c) hist[c][src[p * 3 + c]] += 1.0;
    }
    for (int c = 0; c < 3; ++c) {
      double n = 0, sum = 0, sq = 0;
      for (int v = 0; v < 256; ++v) {
        const double x = v / 255.0;
        n += hist[c][v];
        sum += hist[c][v] * x;
        sq += hist[c][v] * x * x;
      }
      const double mean = sum / n;
      const double sd = std::sqrt(std::max(sq / n - mean * mean, 0.0));
      m.rgb_mean[c] = float(mean);
      m.rgb_std[c] = float(sd > 1e-6 ? sd : 1.0);
    }
  }
  if (uses_depth(m.kind)) {
    std::array<double, 256> hist{};
    for (std::size_t i : idx) {
      const std::uint8_t* src = s.depth.data() + i * plane;
      for (std::size_t p = 0; p < plane; ++p) hist[src[p]] += 1.0;
    }
    double n = 0, sum = 0, sq = 0;
    for (int v = 0; v < 256; ++v) {
      const double x = v / 255.0;
      n += hist[v];
      sum += hist[v] * x;
      sq += hist[v] * x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(sq / n - mean * mean, 0.0));
    m.depth_mean = float(mean);
    m.depth_std = float(sd > 1e-6 ? sd : 1.0);
  }
}

double mse_on(const ForceNet& m, const SampleStore& s, const std::vector<std::size_t>& idx) {
  const std::vector<double> pred = predict_store(m, s, idx);
  double sum = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) sum += (pred[i] - s.force[idx[i]]) * (pred[i] - s.force[idx[i]]);
  return sum / double(idx.size());
}

}  // namespace

const char* kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::RgbMod: return "rgbmod";
    case ModelKind::D: return "d";
    case ModelKind::DMod: return "dmod";
    case ModelKind::RgbModD: return "rgbmod_d";
  }
  return "unknown";
}

ModelKind parse_kind(const std::string& name) {
  for (ModelKind k : {ModelKind::RgbMod, ModelKind::D, ModelKind::DMod, ModelKind::RgbModD})
    if (name == kind_name(k)) return k;
  throw ModelError("unknown model kind: " + name);
}

bool uses_rgb(ModelKind kind) { return kind == ModelKind::RgbMod || kind == ModelKind::RgbModD; }
bool uses_depth(ModelKind kind) { return kind != ModelKind::RgbMod; }
bool has_taps(ModelKind kind) { return kind != ModelKind::D; }

std::vector<LayerSpec> backbone_layers(int in_channels, bool taps, const ArchConfig& arch) {
  const auto& c = arch.stage_channels;
  std::vector<LayerSpec> layers{LayerSpec::conv2d(in_channels, c[0], 4, 4, 0), LayerSpec::relu(),
                                LayerSpec::residual(c[0], c[0], 1), LayerSpec::residual(c[0], c[1], 2)};
  if (taps) layers.push_back(LayerSpec::concat_tap());
  layers.push_back(LayerSpec::residual(c[1], c[2], 2));
  if (taps) layers.push_back(LayerSpec::concat_tap());
  layers.push_back(LayerSpec::residual(c[2], c[3], 2));
  layers.push_back(taps ? LayerSpec::concat_tap() : LayerSpec::global_avg_pool());
  return layers;
}

std::vector<nn::BranchSpec> branch_specs(ModelKind kind, int width, int height, const ArchConfig& arch) {
  if (width < 8 || height < 8 || width % 8 != 0 || height % 8 != 0)
    throw ModelError("resolution must be divisible by 8, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  std::vector<nn::BranchSpec> out;
  if (uses_rgb(kind)) out.push_back({nn::Shape{3, height, width}, backbone_layers(3, has_taps(kind), arch)});
  if (uses_depth(kind)) out.push_back({nn::Shape{1, height, width}, backbone_layers(1, has_taps(kind), arch)});
  return out;
}

std::vector<LayerSpec> head_layers(int features, const ArchConfig& arch) {
  return {LayerSpec::dense(features, arch.head_hidden), LayerSpec::relu(), LayerSpec::dense(arch.head_hidden, 1)};
}

ForceNet build_model(ModelKind kind, int width, int height, std::uint64_t seed, const ArchConfig& arch) {
  const auto branches = branch_specs(kind, width, height, arch);
  int features = 0;
  for (const auto& b : branches) features += nn::detail::branch_feature_width(b);
  ForceNet m;
  m.kind = kind;
  m.width = width;
  m.height = height;
  m.net = nn::Network<float>(branches, head_layers(features, arch), seed);
  return m;
}

bool ablate_tap(ForceNet& model, int stage) {
  if (stage < 2 || stage > 4) throw ModelError("ablate_tap: stage must be 2, 3 or 4");
  if (!has_taps(model.kind)) return false;
  const auto ranges = tap_ranges(model.net);
  nn::Mat<float>& w = model.net.head_layer(0).params[0];
  for (const auto& taps : ranges) {
    const auto [start, count] = taps.at(std::size_t(stage - 2));
    w.middleCols(start, count).setZero();
  }
  return true;
}

SampleStore::SampleStore(int width_, int height_, bool rgb_, bool depth_)
    : width(width_), height(height_), has_rgb(rgb_), has_depth(depth_) {
  if (width < 1 || height < 1) throw ModelError("SampleStore: empty resolution");
  if (!has_rgb && !has_depth) throw ModelError("SampleStore: no modality");
}

void SampleStore::add(const ImageF* frame, const ImageF* depth_image, double force_n, std::string indenter_id) {
  const std::size_t plane = std::size_t(width) * std::size_t(height);
  if (has_rgb) {
    if (!frame || frame->channels() != 3) throw ModelError("SampleStore::add: RGB frame required");
    const ImageF img = resize_bilinear(*frame, width, height);
    const std::size_t base = rgb.size();
    rgb.resize(base + plane * 3);
    for (std::size_t i = 0; i < plane * 3; ++i) rgb[base + i] = to_byte(img.data()[Eigen::Index(i)]);
  }
  if (has_depth) {
    if (!depth_image || depth_image->channels() != 1) throw ModelError("SampleStore::add: depth image required");
    const ImageF img = resize_bilinear(*depth_image, width, height);
    const std::size_t base = depth.size();
    depth.resize(base + plane);
    for (std::size_t i = 0; i < plane; ++i) depth[base + i] = to_byte(img.data()[Eigen::Index(i)]);
  }
  force.push_back(force_n);
  indenter.push_back(std::move(indenter_id));
}

ImageF SampleStore::frame(std::size_t i) const {
  if (!has_rgb) throw ModelError("SampleStore: no RGB frames");
  ImageF img(width, height, 3);
  const std::size_t n = std::size_t(width) * std::size_t(height) * 3;
  for (std::size_t k = 0; k < n; ++k) img.data()[Eigen::Index(k)] = from_byte<float>(rgb[i * n + k]);
  return img;
}

ImageF SampleStore::depth_image(std::size_t i) const {
  if (!has_depth) throw ModelError("SampleStore: no depth images");
  ImageF img(width, height, 1);
  const std::size_t n = std::size_t(width) * std::size_t(height);
  for (std::size_t k = 0; k < n; ++k) img.data()[Eigen::Index(k)] = from_byte<float>(depth[i * n + k]);
  return img;
}

std::uint8_t SampleStore::max_deformation(std::size_t i) const {
  if (!has_depth) throw ModelError("SampleStore: no depth images");
  const std::size_t n = std::size_t(width) * std::size_t(height);
  return *std::max_element(depth.begin() + std::ptrdiff_t(i * n), depth.begin() + std::ptrdiff_t((i + 1) * n));
}

std::vector<std::string> SampleStore::distinct_indenters() const {
  const std::set<std::string> ids(indenter.begin(), indenter.end());
  return {ids.begin(), ids.end()};
}

TrainResult train(ForceNet model, const SampleStore& store, const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train_idx.empty()) throw nn::TrainingError("train: empty training set");
  if (val_idx.empty()) throw nn::TrainingError("train: empty validation set");
  if (cfg.batch_size < 1) throw nn::TrainingError("train: batch size must be >= 1");
  if (!(cfg.lr > 0)) throw nn::TrainingError("train: learning rate must be positive");
  if (cfg.epochs < 1) throw nn::TrainingError("train: epochs must be >= 1");
  check_store(model, store);
  for (const auto* set : {&train_idx, &val_idx})
    for (std::size_t i : *set) {
      if (i >= store.size()) throw nn::TrainingError("train: sample index out of range");
      if (!(store.force[i] >= 0.5 && store.force[i] <= 20.0))
        throw nn::TrainingError("train: force " + format_real(store.force[i]) + " N outside [0.5, 20]");
    }
  tune_allocator();

  set_statistics(model, store, train_idx);
  double mean_force = 0.0;
  for (std::size_t i : train_idx) mean_force += store.force[i];
  mean_force /= double(train_idx.size());
  auto& head = model.net.head();
  model.net.head_layer(head.size() - 1).params[1].setConstant(float(mean_force));

  const InputTables tables = make_tables(model);
  auto adam = nn::AdamState<float>::init(model.net, nn::AdamConfig{cfg.lr});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order = train_idx;

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  nn::Network<float> best_net = model.net;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i-- > 1;) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const int n = int(std::min<std::size_t>(std::size_t(cfg.batch_size), order.size() - start));
      const auto inputs = make_inputs(model, tables, store, order.data() + start, n);
      nn::Mat<float> target(1, n);
      for (int i = 0; i < n; ++i) target(0, i) = float(store.force[order[start + std::size_t(i)]]);
      auto fwd = nn::forward(model.net, inputs);
      auto [loss, grad] = nn::mse_loss(fwd.output, target);
      if (!std::isfinite(loss)) throw nn::TrainingError("train: non-finite loss in epoch " + std::to_string(epoch));
      const auto grads = nn::backward(model.net, fwd.cache, grad);
      nn::adam_step(model.net, grads, adam);
      loss_sum += loss * n;
    }
    EpochRecord rec{epoch, loss_sum / double(order.size()), mse_on(model, store, val_idx)};
    if (!std::isfinite(rec.val_loss)) throw nn::TrainingError("train: non-finite validation loss");
    result.history.push_back(rec);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_net = model.net;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
  }
  model.net = std::move(best_net);
  result.model = std::move(model);
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write history: " + path.string());
  out << "epoch,train_loss,val_loss\n";
  for (const auto& r : history) out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.val_loss) << '\n';
}

std::vector<double> predict_store(const ForceNet& model, const SampleStore& store,
                                  const std::vector<std::size_t>& indices, int batch_size) {
  check_store(model, store);
  tune_allocator();
  const InputTables tables = make_tables(model);
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size(); start += std::size_t(batch_size)) {
    const int n = int(std::min<std::size_t>(std::size_t(batch_size), indices.size() - start));
    const auto y = nn::predict(model.net, make_inputs(model, tables, store, indices.data() + start, n));
    for (int i = 0; i < n; ++i) out.push_back(double(y.data(0, i)));
  }
  return out;
}

double predict_force(const ForceNet& model, const ImageF& frame, const std::optional<ImageF>& depth) {
  if (uses_depth(model.kind) && !depth)
    throw ModelError(std::string(kind_name(model.kind)) + " needs a depth image");
  if (!uses_depth(model.kind) && depth)
    throw ModelError(std::string(kind_name(model.kind)) + " does not take a depth image");
  if (uses_rgb(model.kind) && frame.channels() != 3) throw ModelError("predict_force: frame must be RGB");
  if (depth && depth->channels() != 1) throw ModelError("predict_force: depth image must have one channel");
  SampleStore one(model.width, model.height, uses_rgb(model.kind), uses_depth(model.kind));
  one.add(&frame, depth ? &*depth : nullptr, 1.0, "");
  const std::size_t idx = 0;
  const InputTables tables = make_tables(model);
  return double(nn::predict(model.net, make_inputs(model, tables, one, &idx, 1)).data(0, 0));
}

void save_model(const std::filesystem::path& path, const ForceNet& model) {
  using namespace nn::binary;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot write model: " + path.string());
  os.write("VTFM", 4);
  put_u32(os, 1);
  put_u32(os, std::uint32_t(model.kind));
  put_i32(os, model.width);
  put_i32(os, model.height);
  for (float v : model.rgb_mean) put_f64(os, v);
  for (float v : model.rgb_std) put_f64(os, v);
  put_f64(os, model.depth_mean);
  put_f64(os, model.depth_std);
  nn::write_weights(os, model.net.cast<double>());
  if (!os) throw ModelError("failed writing model: " + path.string());
}

ForceNet load_model(const std::filesystem::path& path) {
  using namespace nn::binary;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open model: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "VTFM") throw nn::FormatError("not a model file: " + path.string());
  if (get_u32(is) != 1) throw nn::FormatError("unsupported model version: " + path.string());
  const std::uint32_t kind = get_u32(is);
  if (kind < 1 || kind > 4) throw nn::FormatError("unknown model kind tag in " + path.string());
  ForceNet m;
  m.kind = ModelKind(kind);
  m.width = get_i32(is);
  m.height = get_i32(is);
  for (float& v : m.rgb_mean) v = float(get_f64(is));
  for (float& v : m.rgb_std) v = float(get_f64(is));
  m.depth_mean = float(get_f64(is));
  m.depth_std = float(get_f64(is));
  m.net = nn::read_weights(is).cast<float>();
  const auto expected = branch_specs(m.kind, m.width, m.height);
  if (m.net.branches().size() != expected.size())
    throw nn::FormatError("model branches do not match kind " + std::string(kind_name(m.kind)));
  for (std::size_t b = 0; b < expected.size(); ++b)
    if (!(m.net.branches()[b].input == expected[b].input))
      throw nn::FormatError("model input shape does not match its header: " + path.string());
  return m;
}

PolyModel fit_poly_baseline(const std::vector<std::pair<double, double>>& samples) {
  std::set<double> distinct;
  for (const auto& [x, y] : samples) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw ModelError("fit_poly_baseline: non-finite sample");
    distinct.insert(x);
  }
  if (distinct.size() < 4)
    throw ModelError("fit_poly_baseline: rank deficient, need 4 distinct deformation values, got " +
                     std::to_string(distinct.size()));
  // Fit on x / 255 for conditioning, then rescale the coefficients.
  constexpr double kScale = 255.0;
  const Eigen::Index n = Eigen::Index(samples.size());
  Eigen::MatrixXd v(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = samples[std::size_t(i)].first / kScale;
    v.row(i) << 1.0, u, u * u, u * u * u;
    y[i] = samples[std::size_t(i)].second;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  if (qr.rank() < 4) throw ModelError("fit_poly_baseline: rank deficient design matrix");
  const Eigen::Vector4d a = qr.solve(y);
  PolyModel m;
  for (int k = 0; k < 4; ++k) m.c[std::size_t(k)] = a[k] / std::pow(kScale, k);
  m.residual_rms = std::sqrt((v * a - y).squaredNorm() / double(n));
  return m;
}

double poly_eval(const PolyModel& m, double x) { return m.c[0] + x * (m.c[1] + x * (m.c[2] + x * m.c[3])); }

double poly_predict(const PolyModel& m, const ImageF& depth_image) {
  if (depth_image.channels() != 1 || depth_image.empty()) throw ModelError("poly_predict: one-channel depth image required");
  return poly_eval(m, double(to_byte(depth_image.data().maxCoeff())));
}

void save_poly(const std::filesystem::path& path, const PolyModel& m) {
  nlohmann::json j{{"coefficients", m.c}, {"residual_rms", m.residual_rms}};
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write polynomial model: " + path.string());
  out << j.dump(2) << '\n';
}

PolyModel load_poly(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open polynomial model: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    PolyModel m;
    m.c = j.at("coefficients").get<std::array<double, 4>>();
    m.residual_rms = j.value("residual_rms", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
}

}  // namespace vtf::force
