#include "vtf/depthrecon.hpp"

#include "vtf/nn/adam.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>

namespace vtf {

namespace {

void require_same_grid(const ImageF& a, const ImageF& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ReconstructionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                              std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                              std::to_string(b.height()) + ")");
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

NormalMap infer_normals(const nn::Network<double>& mlp, const ImageF& frame) {
  if (mlp.branches().size() != 1 || mlp.branches()[0].input.channels != 5 || mlp.output_size() != 3)
    throw ReconstructionError("infer_normals: model must map 5 inputs to 3 outputs");
  if (frame.channels() != 3) throw ReconstructionError("infer_normals: frame must have 3 channels");
  const int w = frame.width(), h = frame.height();
  NormalMap out(w, h);
  const Eigen::Index total = Eigen::Index(w) * h;
  constexpr Eigen::Index kChunk = 4096;
  // Pixel data is single precision; so is inference.
  const nn::Network<float> net = mlp.cast<float>();
  nn::Tensor<float> x;
  for (Eigen::Index start = 0; start < total; start += kChunk) {
    const Eigen::Index n = std::min(kChunk, total - start);
    x = nn::Tensor<float>(5, int(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const int px = int((start + i) % w), py = int((start + i) / w);
      x.data.col(i) << frame.at(px, py, 0), frame.at(px, py, 1), frame.at(px, py, 2), float(normalized_coord(px, w)),
          float(normalized_coord(py, h));
    }
    const nn::Tensor<float> y = nn::predict(net, x);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int px = int((start + i) % w), py = int((start + i) / w);
      const double nx = y.data(0, i), ny = y.data(1, i), nz = std::max(double(y.data(2, i)), kMinNormalZ);
      const double inv = 1.0 / std::sqrt(nx * nx + ny * ny + nz * nz);
      out.nx(py, px) = nx * inv;
      out.ny(py, px) = ny * inv;
      out.nz(py, px) = nz * inv;
    }
  }
  return out;
}

GradientField normals_to_gradients(const NormalMap& n) {
  return GradientField(n.nx / n.nz, n.ny / n.nz);
}

void save_scale_record(const std::filesystem::path& path, const ScaleRecord& s) {
  nlohmann::json j;
  j["max_depth"] = s.max_depth;
  j["calibrated_at"] = s.calibrated_at;
  j["mlp_weights"] = s.mlp_weights;
  j["reference_frame"] = s.reference_frame;
  std::ofstream out(path);
  if (!out) throw ReconstructionError("cannot write scale record: " + path.string());
  out << j.dump(2) << '\n';
}

ScaleRecord load_scale_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ReconstructionError("cannot open scale record: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    ScaleRecord s;
    s.max_depth = j.at("max_depth").get<double>();
    s.calibrated_at = j.value("calibrated_at", "");
    s.mlp_weights = j.at("mlp_weights").get<std::string>();
    s.reference_frame = j.value("reference_frame", "");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ReconstructionError(path.string() + ": " + e.what());
  }
}

ImageF depth_to_image(const DepthMap& h, const ScaleRecord& scale) {
  if (!(scale.max_depth > 0)) throw ReconstructionError("depth_to_image: max_depth must be positive");
  ImageF out(int(h.cols()), int(h.rows()), 1);
  for (int y = 0; y < h.rows(); ++y)
    for (int x = 0; x < h.cols(); ++x) out.at(x, y) = float(std::clamp(h(y, x) / scale.max_depth, 0.0, 1.0));
  return out;
}

ContactMask erode3(const ContactMask& m) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  ContactMask out = ContactMask::Constant(rows, cols, false);
  for (Eigen::Index y = 1; y + 1 < rows; ++y)
    for (Eigen::Index x = 1; x + 1 < cols; ++x) out(y, x) = m.block(y - 1, x - 1, 3, 3).all();
  return out;
}

ContactMask dilate3(const ContactMask& m) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  ContactMask out = ContactMask::Constant(rows, cols, false);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      if (!m(y, x)) continue;
      const Eigen::Index y0 = std::max<Eigen::Index>(y - 1, 0), y1 = std::min(y + 1, rows - 1);
      const Eigen::Index x0 = std::max<Eigen::Index>(x - 1, 0), x1 = std::min(x + 1, cols - 1);
      out.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1) = true;
    }
  }
  return out;
}

ContactMask contact_mask_from_diff(const ImageF& frame, const ImageF& reference, double threshold) {
  if (!frame.same_shape(reference)) throw ReconstructionError("contact_mask_from_diff: frame/reference shape mismatch");
  ContactMask m(frame.height(), frame.width());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      float diff = 0.0f;
      for (int c = 0; c < frame.channels(); ++c) diff = std::max(diff, std::abs(frame.at(x, y, c) - reference.at(x, y, c)));
      m(y, x) = diff > threshold;
    }
  }
  return dilate3(erode3(m));
}

ContactMask fill_holes(const ContactMask& m) {
  const int rows = int(m.rows()), cols = int(m.cols());
  // Flood the background from the border; anything false and unreached is a hole.
  ContactMask outside = ContactMask::Constant(rows, cols, false);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int y, int x) {
    if (!m(y, x) && !outside(y, x)) {
      outside(y, x) = true;
      stack.emplace_back(y, x);
    }
  };
  for (int x = 0; x < cols; ++x) {
    seed(0, x);
    seed(rows - 1, x);
  }
  for (int y = 0; y < rows; ++y) {
    seed(y, 0);
    seed(y, cols - 1);
  }
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    if (y > 0) seed(y - 1, x);
    if (y + 1 < rows) seed(y + 1, x);
    if (x > 0) seed(y, x - 1);
    if (x + 1 < cols) seed(y, x + 1);
  }
  return !outside;
}

ImageF apply_contact_mask(const ImageF& d, const ContactMask& m) {
  if (d.channels() != 1) throw ReconstructionError("apply_contact_mask: depth image must have one channel");
  if (m.rows() != d.height() || m.cols() != d.width())
    throw ReconstructionError("apply_contact_mask: mask/image dimension mismatch");
  ImageF out = d;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (!m(y, x)) out.at(x, y) = 0.0f;
  return out;
}

DepthMap reconstruct_height(const nn::Network<double>& mlp, const ImageF& frame) {
  return -dst_poisson_solve(normals_to_gradients(infer_normals(mlp, frame)));
}

ContactMask pipeline_mask(const ImageF& frame, const ImageF& reference, const ReconstructOptions& opt) {
  ContactMask m = contact_mask_from_diff(frame, reference, opt.mask_threshold);
  return opt.fill_mask_holes ? fill_holes(m) : m;
}

Reconstruction reconstruct(const nn::Network<double>& mlp, const ImageF& frame, const ImageF& reference,
                           const ScaleRecord& scale, const ReconstructOptions& opt) {
  require_same_grid(frame, reference, "reconstruct");
  Reconstruction r;
  r.height = reconstruct_height(mlp, frame);
  r.mask = pipeline_mask(frame, reference, opt);
  r.depth_image = apply_contact_mask(depth_to_image(r.height, scale), r.mask);
  return r;
}

nn::Network<double> make_normal_mlp(int hidden, std::uint64_t seed) {
  using nn::LayerSpec;
  if (hidden < 1) throw std::invalid_argument("make_normal_mlp: hidden width must be >= 1");
  nn::BranchSpec branch{nn::Shape{5, 1, 1},
                        {LayerSpec::dense(5, hidden), LayerSpec::tanh(), LayerSpec::dense(hidden, hidden),
                         LayerSpec::tanh(), LayerSpec::dense(hidden, 3)}};
  return nn::Network<double>({branch}, {}, seed);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (!(p >= 0 && p <= 100)) throw std::invalid_argument("percentile: p must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

CalibrationResult calibrate(const std::vector<SpherePress>& presses, const ImageF& reference,
                            const CalibrationConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw std::invalid_argument("calibrate: epochs and batch size must be >= 1");
  const CalibrationSet set = build_calibration_set(presses);
  if (set.size() == 0) throw CalibrationError("calibrate: presses produced no in-contact pixels");
  require_same_grid(presses.front().frame, reference, "calibrate");

  CalibrationResult result{make_normal_mlp(cfg.hidden, cfg.seed), 0.0, {}};
  nn::Network<double>& net = result.mlp;
  auto adam = nn::AdamState<double>::init(net, nn::AdamConfig{cfg.lr});
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ull);
  std::vector<Eigen::Index> order(std::size_t(set.size()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    Eigen::Index seen = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const int n = int(std::min<std::size_t>(std::size_t(cfg.batch_size), order.size() - start));
      nn::Tensor<double> x(5, n);
      nn::Mat<double> t(3, n);
      for (int i = 0; i < n; ++i) {
        x.data.col(i) = set.inputs.col(order[start + std::size_t(i)]);
        t.col(i) = set.targets.col(order[start + std::size_t(i)]);
      }
      auto fwd = nn::forward(net, x);
      auto [loss, grad] = nn::mse_loss(fwd.output, t);
      const auto grads = nn::backward(net, fwd.cache, grad);
      nn::adam_step(net, grads, adam);
      loss_sum += loss * n;
      seen += n;
    }
    result.loss_history.push_back(loss_sum / double(seen));
  }

  std::vector<double> pooled;
  const ReconstructOptions opt{cfg.mask_threshold, true};
  for (const SpherePress& p : presses) {
    const DepthMap h = reconstruct_height(net, p.frame);
    const ContactMask m = pipeline_mask(p.frame, reference, opt);
    for (Eigen::Index y = 0; y < h.rows(); ++y)
      for (Eigen::Index x = 0; x < h.cols(); ++x)
        if (m(y, x)) pooled.push_back(h(y, x));
  }
  if (pooled.empty()) throw CalibrationError("calibrate: no in-mask pixels to fix the depth scale");
  result.max_depth = percentile(std::move(pooled), cfg.percentile);
  if (!(result.max_depth > 0)) throw CalibrationError("calibrate: reconstructed heights are not positive");
  return result;
}

}  // namespace vtf
