#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace vtf {

/// Dense per-pixel field, rows = image rows (y), cols = image columns (x).
template <typename Scalar>
using Field = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FieldD = Field<double>;
using ContactMask = Field<bool>;

/// Interleaved row-major raster with values in [0,1].
///
/// Pixel (x, y) channel c lives at index (y * width + x) * channels + c,
/// top-left origin, x rightward and y downward.
template <typename Scalar>
class Image {
public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Image() = default;
  Image(int width, int height, int channels, Scalar fill = Scalar(0))
      : width_(width), height_(height), channels_(channels),
        data_(Storage::Constant(Eigen::Index(width) * height * channels, fill)) {
    if (width < 0 || height < 0)
      throw std::invalid_argument("Image: negative dimension");
    if (channels != 1 && channels != 3)
      throw std::invalid_argument("Image: channels must be 1 or 3");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  Eigen::Index pixel_count() const { return Eigen::Index(width_) * height_; }
  bool empty() const { return data_.size() == 0; }

  Scalar& at(int x, int y, int c = 0) {
    return data_[(Eigen::Index(y) * width_ + x) * channels_ + c];
  }
  Scalar at(int x, int y, int c = 0) const {
    return data_[(Eigen::Index(y) * width_ + x) * channels_ + c];
  }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  /// Channel c as a height x width field.
  Field<Scalar> plane(int c) const {
    Field<Scalar> out(height_, width_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) out(y, x) = at(x, y, c);
    return out;
  }

  void set_plane(int c, const Field<Scalar>& values) {
    if (values.rows() != height_ || values.cols() != width_)
      throw std::invalid_argument("Image::set_plane: dimension mismatch");
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) at(x, y, c) = values(y, x);
  }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out(width_, height_, channels_);
    out.data() = data_.template cast<Other>();
    return out;
  }

  bool operator==(const Image& o) const {
    return same_shape(o) && (data_ == o.data_).all();
  }

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  Storage data_;
};

using ImageF = Image<float>;
using ImageD = Image<double>;

class ImageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Byte quantization used on save: round half up, clamped to [0,255].
template <typename Scalar>
inline std::uint8_t to_byte(Scalar v) {
  const double scaled = std::floor(double(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled));
}

template <typename Scalar>
inline Scalar from_byte(std::uint8_t b) {
  return Scalar(double(b) / 255.0);
}

/// Decodes an 8-bit grayscale or RGB PNG (palette images expand to RGB).
/// 16-bit and alpha images raise ImageError naming the path.
ImageF load_image(const std::filesystem::path& path);

/// Encodes as 8-bit PNG, quantizing each value with to_byte.
void save_image(const ImageF& img, const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment and edge clamping.
template <typename Scalar>
Image<Scalar> resize_bilinear(const Image<Scalar>& img, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1)
    throw std::invalid_argument("resize_bilinear: target dimension must be >= 1");
  if (img.empty()) throw std::invalid_argument("resize_bilinear: empty image");
  if (new_w == img.width() && new_h == img.height()) return img;

  Image<Scalar> out(new_w, new_h, img.channels());
  const double sx = double(img.width()) / new_w;
  const double sy = double(img.height()) / new_h;
  for (int y = 0; y < new_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, double(img.height() - 1));
    const int y0 = int(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, double(img.width() - 1));
      const int x0 = int(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bot = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        // Convex combination; clamp guards the last-ulp overshoot for constant images.
        const double v = (1 - wy) * top + wy * bot;
        const double lo = std::min({img.at(x0, y0, c), img.at(x1, y0, c), img.at(x0, y1, c), img.at(x1, y1, c)});
        const double hi = std::max({img.at(x0, y0, c), img.at(x1, y0, c), img.at(x0, y1, c), img.at(x1, y1, c)});
        out.at(x, y, c) = Scalar(std::clamp(v, lo, hi));
      }
    }
  }
  return out;
}

}  // namespace vtf
