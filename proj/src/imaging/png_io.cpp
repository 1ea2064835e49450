// Copyright 2026 The tradeoff-sr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <string>

#include "tsr/imaging.hpp"
#include "tsr/io.hpp"

namespace tsr::imaging {
namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

void on_png_error(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message != nullptr) *message = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

std::uint8_t quantize_byte(double v) {
  const double q = std::floor(v * 255.0 + 0.5);
  if (!(q > 0.0)) return 0;  // also maps NaN to 0
  if (q >= 255.0) return 255;
  return static_cast<std::uint8_t>(q);
}

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    fail(ErrorCode::UnsupportedFormat, "not a PNG stream");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  if (png == nullptr) fail(ErrorCode::IoFailure, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};

  // Locals touched after setjmp live outside the protected region.
  ImageTensor result;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  bool unsupported = false;
  std::string unsupported_reason;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::UnsupportedFormat, "undecodable PNG: " + message);
  }
  png_set_read_fn(png, &cursor, read_from_memory);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  int channels = 0;
  if (color == PNG_COLOR_TYPE_GRAY) channels = 1;
  if (color == PNG_COLOR_TYPE_RGB) channels = 3;
  if (channels == 0) {
    unsupported = true;
    unsupported_reason = "only grayscale or RGB PNGs are supported (color type " + std::to_string(color) + ")";
  } else if (depth != 8 && depth != 16) {
    unsupported = true;
    unsupported_reason = "only 8- or 16-bit PNGs are supported (bit depth " + std::to_string(depth) + ")";
  }
  if (unsupported) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::UnsupportedFormat, unsupported_reason);
  }
  if (depth == 16) png_set_swap(png);  // native little-endian 16-bit samples
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int h = static_cast<int>(height);
  const int w = static_cast<int>(width);
  result = ImageTensor(Shape{channels, h, w});
  const double maxv = depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = buffer.data() + static_cast<std::size_t>(y) * rowbytes;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
        double v = 0.0;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, row + idx * 2, 2);
          v = s;
        } else {
          v = row[idx];
        }
        result.at(c, y, x) = v / maxv;
      }
    }
  }
  return result;
}

std::vector<std::uint8_t> encode_png(const ImageTensor& img) {
  const int c = img.channels();
  if (c != 1 && c != 3) fail(ErrorCode::UnsupportedFormat, "PNG output needs 1 or 3 channels");
  if (img.height() < 1 || img.width() < 1) fail(ErrorCode::IoFailure, "cannot encode an empty image");
  const int h = img.height();
  const int w = img.width();
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * w * c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        pixels[(static_cast<std::size_t>(y) * w + x) * c + ch] = quantize_byte(img.at(ch, y, x));

  std::vector<std::uint8_t> out;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  if (png == nullptr) fail(ErrorCode::IoFailure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoFailure, "PNG encode failed: " + message);
  }
  png_set_write_fn(png, &out, write_to_memory, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * c;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageTensor load_png(const std::filesystem::path& path) { return decode_png(io::read_file(path)); }

void save_png(const ImageTensor& img, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_png(img));
}

}  // namespace tsr::imaging
