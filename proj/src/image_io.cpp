#include "vtf/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace vtf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw ImageError(msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

ImageF load_image(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ImageError("cannot open image file: " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ImageError("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_handler, png_warning_handler);
  if (!png) throw ImageError("libpng init failed: " + path.string());
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_read_struct(&p, &i, nullptr); }
  } guard{png, info};

  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 8)
      throw ImageError("unsupported bit depth " + std::to_string(bit_depth) + ": " + path.string());
    if (color_type & PNG_COLOR_MASK_ALPHA)
      throw ImageError("alpha channel not supported: " + path.string());
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
      throw ImageError("transparency not supported: " + path.string());
    png_read_update_info(png, info);

    const int width = int(png_get_image_width(png, info));
    const int height = int(png_get_image_height(png, info));
    const int channels = int(png_get_channels(png, info));
    if (channels != 1 && channels != 3)
      throw ImageError("unsupported channel count: " + path.string());

    std::vector<png_byte> buffer(std::size_t(width) * height * channels);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = buffer.data() + std::size_t(y) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    ImageF img(width, height, channels);
    for (std::size_t i = 0; i < buffer.size(); ++i) img.data()[Eigen::Index(i)] = from_byte<float>(buffer[i]);
    return img;
  } catch (const ImageError& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw ImageError("decode error in " + path.string() + ": " + msg);
  }
}

void save_image(const ImageF& img, const std::filesystem::path& path) {
  if (img.empty()) throw ImageError("cannot save empty image: " + path.string());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw ImageError("cannot write image file: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_handler, png_warning_handler);
  if (!png) throw ImageError("libpng init failed: " + path.string());
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp& p;
    png_infop& i;
    ~Guard() { png_destroy_write_struct(&p, &i); }
  } guard{png, info};

  const int channels = img.channels();
  std::vector<png_byte> buffer(std::size_t(img.data().size()));
  for (std::size_t i = 0; i < buffer.size(); ++i) buffer[i] = to_byte(img.data()[Eigen::Index(i)]);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y)
    rows[y] = buffer.data() + std::size_t(y) * img.width() * channels;

  try {
    png_init_io(png, file.get());
    png_set_compression_level(png, 3);
    png_set_IHDR(png, info, png_uint_32(img.width()), png_uint_32(img.height()), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  } catch (const ImageError& e) {
    throw ImageError("encode error in " + path.string() + ": " + e.what());
  }
}

}  // namespace vtf
