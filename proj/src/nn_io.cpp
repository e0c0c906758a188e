#include "vtf/nn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace vtf::nn {

namespace binary {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i32(std::ostream& os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("weights: unexpected end of file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_u32(is)); }

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw FormatError("weights: unexpected end of file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace binary

namespace {

using namespace binary;

void put_layer(std::ostream& os, const Layer<double>& l) {
  put_u32(os, static_cast<std::uint32_t>(l.spec.kind));
  put_i32(os, l.spec.in);
  put_i32(os, l.spec.out);
  put_i32(os, l.spec.kernel);
  put_i32(os, l.spec.stride);
  put_i32(os, l.spec.padding);
  put_u32(os, static_cast<std::uint32_t>(l.params.size()));
  for (const auto& p : l.params) {
    put_u32(os, static_cast<std::uint32_t>(p.rows()));
    put_u32(os, static_cast<std::uint32_t>(p.cols()));
    for (Eigen::Index i = 0; i < p.size(); ++i) put_f64(os, p.data()[i]);
  }
}

Layer<double> get_layer(std::istream& is) {
  Layer<double> l;
  const std::uint32_t tag = get_u32(is);
  if (tag < 1 || tag > 8) throw FormatError("weights: unknown layer kind tag " + std::to_string(tag));
  l.spec.kind = static_cast<LayerKind>(tag);
  l.spec.in = get_i32(is);
  l.spec.out = get_i32(is);
  l.spec.kernel = get_i32(is);
  l.spec.stride = get_i32(is);
  l.spec.padding = get_i32(is);
  const std::uint32_t blocks = get_u32(is);
  if (blocks > 6) throw FormatError("weights: implausible parameter block count");
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const std::uint32_t rows = get_u32(is);
    const std::uint32_t cols = get_u32(is);
    if (std::uint64_t(rows) * cols > (std::uint64_t(1) << 28)) throw FormatError("weights: block too large");
    Mat<double> p(rows, cols);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = get_f64(is);
    l.params.push_back(std::move(p));
  }
  return l;
}

}  // namespace

void write_weights(std::ostream& os, const Network<double>& net) {
  os.write(kWeightsMagic, 4);
  put_u32(os, kWeightsVersion);
  put_u32(os, static_cast<std::uint32_t>(net.branches().size()));
  std::uint32_t total = static_cast<std::uint32_t>(net.head().size());
  for (const auto& b : net.branches()) total += static_cast<std::uint32_t>(b.layers.size());
  put_u32(os, total);
  for (const auto& b : net.branches()) {
    put_u32(os, static_cast<std::uint32_t>(b.input.channels));
    put_u32(os, static_cast<std::uint32_t>(b.input.height));
    put_u32(os, static_cast<std::uint32_t>(b.input.width));
    put_u32(os, static_cast<std::uint32_t>(b.layers.size()));
    for (const auto& l : b.layers) put_layer(os, l);
  }
  put_u32(os, static_cast<std::uint32_t>(net.head().size()));
  for (const auto& l : net.head()) put_layer(os, l);
  if (!os) throw FormatError("weights: write failed");
}

Network<double> read_weights(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kWeightsMagic, 4) != 0)
    throw FormatError("weights: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kWeightsVersion) throw FormatError("weights: unsupported version " + std::to_string(version));
  const std::uint32_t branch_count = get_u32(is);
  const std::uint32_t total = get_u32(is);
  if (branch_count == 0 || branch_count > 16) throw FormatError("weights: implausible branch count");
  std::vector<Branch<double>> branches;
  std::uint32_t seen = 0;
  for (std::uint32_t b = 0; b < branch_count; ++b) {
    Branch<double> br;
    br.input.channels = int(get_u32(is));
    br.input.height = int(get_u32(is));
    br.input.width = int(get_u32(is));
    const std::uint32_t n = get_u32(is);
    if (n > total) throw FormatError("weights: layer count exceeds header");
    for (std::uint32_t i = 0; i < n; ++i) br.layers.push_back(get_layer(is));
    seen += n;
    branches.push_back(std::move(br));
  }
  const std::uint32_t head_count = get_u32(is);
  std::vector<Layer<double>> head;
  for (std::uint32_t i = 0; i < head_count && seen + i < total; ++i) head.push_back(get_layer(is));
  if (seen + head_count != total) throw FormatError("weights: layer count does not match header");
  try {
    return Network<double>(std::move(branches), std::move(head));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("weights: inconsistent architecture: ") + e.what());
  }
}

void save_weights(const std::filesystem::path& path, const Network<double>& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write weights file: " + path.string());
  write_weights(os, net);
}

Network<double> load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open weights file: " + path.string());
  return read_weights(is);
}

}  // namespace vtf::nn
