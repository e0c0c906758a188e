#include "vtf/image.hpp"

#include <gtest/gtest.h>
#include <png.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

namespace fs = std::filesystem;
using namespace vtf;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "vtf_test_imgcore";
  fs::create_directories(dir);
  return dir / name;
}

// Writes PNG bytes with libpng directly, independent of save_image.
void write_raw_png(const fs::path& path, int w, int h, int color_type, int bit_depth,
                   const std::vector<unsigned char>& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row = bytes.size() / std::size_t(h);
  for (int y = 0; y < h; ++y) png_write_row(png, bytes.data() + std::size_t(y) * row);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST(LoadImage, RgbBytesMapToUnitRange) {
  const auto p = temp_path("red.png");
  write_raw_png(p, 1, 1, PNG_COLOR_TYPE_RGB, 8, {255, 0, 0});
  const ImageF img = load_image(p);
  ASSERT_EQ(img.channels(), 3);
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(0, 0, 1), 0.0f);
  EXPECT_EQ(img.at(0, 0, 2), 0.0f);
}

TEST(LoadImage, GrayZeros) {
  const auto p = temp_path("gray0.png");
  write_raw_png(p, 2, 2, PNG_COLOR_TYPE_GRAY, 8, {0, 0, 0, 0});
  const ImageF img = load_image(p);
  EXPECT_EQ(img.channels(), 1);
  EXPECT_EQ(img.data().size(), 4);
  EXPECT_TRUE((img.data() == 0.0f).all());
}

TEST(LoadImage, SensorSizedFrameKeepsShape) {
  const auto p = temp_path("sensor.png");
  write_raw_png(p, 320, 240, PNG_COLOR_TYPE_RGB, 8, std::vector<unsigned char>(320 * 240 * 3, 77));
  const ImageF img = load_image(p);
  EXPECT_EQ(img.width(), 320);
  EXPECT_EQ(img.height(), 240);
  EXPECT_EQ(img.channels(), 3);
}

TEST(LoadImage, ValueIsByteOver255) {
  const auto p = temp_path("ramp.png");
  std::vector<unsigned char> bytes(256);
  for (int i = 0; i < 256; ++i) bytes[std::size_t(i)] = static_cast<unsigned char>(i);
  write_raw_png(p, 256, 1, PNG_COLOR_TYPE_GRAY, 8, bytes);
  const ImageF img = load_image(p);
  for (int i = 0; i < 256; ++i) EXPECT_EQ(img.at(i, 0), float(double(i) / 255.0));
}

TEST(LoadImage, SixteenBitNamesPath) {
  const auto p = temp_path("deep.png");
  write_raw_png(p, 1, 1, PNG_COLOR_TYPE_GRAY, 16, {1, 2});
  try {
    load_image(p);
    FAIL() << "expected ImageError";
  } catch (const ImageError& e) {
    EXPECT_NE(std::string(e.what()).find(p.string()), std::string::npos);
  }
}

TEST(LoadImage, MissingFile) { EXPECT_THROW(load_image(temp_path("nope.png")), ImageError); }

TEST(SaveImage, WhiteRoundTrip) {
  const auto p = temp_path("white.png");
  save_image(ImageF(1, 1, 1, 1.0f), p);
  EXPECT_EQ(load_image(p).at(0, 0), 1.0f);
}

TEST(SaveImage, HalfRoundsUp) {
  const auto p = temp_path("half.png");
  save_image(ImageF(1, 1, 1, 0.5f), p);
  EXPECT_EQ(load_image(p).at(0, 0), 128.0f / 255.0f);
  EXPECT_EQ(to_byte(0.5), 128);
}

TEST(SaveImage, ThreeChannelsPreserved) {
  const auto p = temp_path("rgb.png");
  save_image(ImageF(3, 2, 3, 0.25f), p);
  const ImageF img = load_image(p);
  EXPECT_EQ(img.channels(), 3);
  EXPECT_EQ(img.width(), 3);
  EXPECT_EQ(img.height(), 2);
}

TEST(SaveImage, UnwritablePath) {
  EXPECT_THROW(save_image(ImageF(1, 1, 1), "/nonexistent_dir_vtf/x.png"), ImageError);
}

TEST(SaveImage, LoadSaveIsIdentityOnQuantizedImages) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> byte(0, 255);
  ImageF img(17, 9, 3);
  for (Eigen::Index i = 0; i < img.data().size(); ++i) img.data()[i] = from_byte<float>(std::uint8_t(byte(rng)));
  const auto p = temp_path("quant.png");
  save_image(img, p);
  const ImageF back = load_image(p);
  EXPECT_TRUE((back.data() == img.data()).all());
}

TEST(Resize, ConstantStaysConstant) {
  const ImageF out = resize_bilinear(ImageF(320, 240, 3, 0.3f), 160, 120);
  EXPECT_EQ(out.width(), 160);
  EXPECT_EQ(out.height(), 120);
  EXPECT_TRUE(((out.data() - 0.3f).abs() < 1e-6f).all());
}

TEST(Resize, IdentityIsBitwiseEqual) {
  ImageF img(5, 4, 3);
  for (Eigen::Index i = 0; i < img.data().size(); ++i) img.data()[i] = float(i % 7) / 7.0f;
  const ImageF out = resize_bilinear(img, 5, 4);
  EXPECT_TRUE((out.data() == img.data()).all());
}

TEST(Resize, UpsampleMatchesHandBilinear) {
  ImageF img(2, 1, 1);
  img.at(0, 0) = 0.0f;
  img.at(1, 0) = 1.0f;
  const ImageF out = resize_bilinear(img, 4, 1);
  // Pixel-centre alignment: output x maps to (x + 0.5) * 2/4 - 0.5, clamped to [0, 1].
  const double expected[4] = {0.0, 0.25, 0.75, 1.0};
  for (int x = 0; x < 4; ++x) EXPECT_NEAR(out.at(x, 0), expected[x], 1e-7);
  for (int x = 1; x < 4; ++x) EXPECT_GE(out.at(x, 0), out.at(x - 1, 0));
}

TEST(Resize, ZeroTargetRejected) { EXPECT_THROW(resize_bilinear(ImageF(2, 2, 1), 0, 2), std::invalid_argument); }

TEST(Resize, PreservesValueRange) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<float> u(0.2f, 0.7f);
  ImageF img(13, 11, 3);
  for (Eigen::Index i = 0; i < img.data().size(); ++i) img.data()[i] = u(rng);
  for (auto [w, h] : {std::pair{5, 4}, std::pair{31, 29}, std::pair{13, 3}}) {
    const ImageF out = resize_bilinear(img, w, h);
    EXPECT_GE(out.data().minCoeff(), img.data().minCoeff());
    EXPECT_LE(out.data().maxCoeff(), img.data().maxCoeff());
  }
}

TEST(Image, RejectsBadChannels) { EXPECT_THROW(ImageF(2, 2, 2), std::invalid_argument); }
