#pragma once

#include "vtf/nn/network.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

namespace vtf::nn {

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kWeightsMagic[4] = {'V', 'T', 'F', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

/// Little-endian primitives shared by the weights and model formats.
namespace binary {
void put_u32(std::ostream& os, std::uint32_t v);
void put_i32(std::ostream& os, std::int32_t v);
void put_f64(std::ostream& os, double v);
std::uint32_t get_u32(std::istream& is);
std::int32_t get_i32(std::istream& is);
double get_f64(std::istream& is);
}  // namespace binary

/// Binary weights layout, all integers u32/i32 and reals f64, little-endian:
///   magic "VTFW", version, branch count, total layer count,
///   per branch: input c/h/w, layer count, layers;
///   head layer count, layers;
///   per layer: kind tag, in, out, kernel, stride, padding, block count,
///              per block: rows, cols, rows*cols values (row-major).
void write_weights(std::ostream& os, const Network<double>& net);
Network<double> read_weights(std::istream& is);

void save_weights(const std::filesystem::path& path, const Network<double>& net);
Network<double> load_weights(const std::filesystem::path& path);

}  // namespace vtf::nn
