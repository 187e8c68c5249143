#include "dsnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace dsnet::io {

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long header_number(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000UL) throw FormatError(std::string("PGM ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PGM: expected ") + field, start);
    return value;
  }

  std::uint8_t byte() {
    if (pos_ >= bytes_.size()) throw FormatError("PGM raster truncated", pos_);
    return bytes_[pos_++];
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 255.0f)));
}

std::vector<std::uint8_t> encode_png_raw(std::size_t height, std::size_t width,
                                         png_uint_32 format, std::span<const std::uint8_t> raw) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

Image decode_pgm(std::span<const std::uint8_t> bytes) {
  PgmReader r(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw FormatError("not a PGM file (expected P5 or P2 magic)", 0);
  }
  const bool binary = bytes[1] == '5';
  r.byte();
  r.byte();
  const auto width = r.header_number("width");
  const auto height = r.header_number("height");
  const std::size_t maxval_pos = r.pos();
  const auto maxval = r.header_number("maxval");
  if (width == 0 || height == 0) throw FormatError("PGM has zero extent", maxval_pos);
  if (maxval == 0 || maxval > 65535) throw FormatError("PGM maxval out of range", maxval_pos);
  const float scale = 255.0f / static_cast<float>(maxval);

  Image img(height, width);
  auto px = img.data();
  if (binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    const std::uint8_t sep = r.byte();
    if (!std::isspace(sep)) throw FormatError("PGM: missing whitespace before raster", r.pos() - 1);
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    if (r.remaining() < px.size() * bytes_per) {
      throw FormatError("PGM raster truncated: need " + std::to_string(px.size() * bytes_per) +
                            " bytes, have " + std::to_string(r.remaining()),
                        r.pos() + r.remaining());
    }
    for (float& p : px) {
      unsigned v = r.byte();
      if (bytes_per == 2) v = (v << 8) | r.byte();
      if (v > maxval) throw FormatError("PGM sample exceeds maxval", r.pos() - bytes_per);
      p = maxval == 255 ? static_cast<float>(v) : static_cast<float>(v) * scale;
    }
  } else {
    for (float& p : px) {
      const std::size_t at = r.pos();
      const auto v = r.header_number("sample");
      if (v > maxval) throw FormatError("PGM sample exceeds maxval", at);
      p = maxval == 255 ? static_cast<float>(v) : static_cast<float>(v) * scale;
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const Image& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.data().size());
  for (float p : img.data()) out.push_back(to_byte(p));
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("PNG decode failed: ") + image.message, 0);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                       : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const std::size_t channels = PNG_IMAGE_PIXEL_CHANNELS(image.format);
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("PNG decode failed: " + msg, 0);
  }
  Image img(image.height, image.width);
  auto px = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const std::uint8_t* p = raw.data() + i * channels;
    if (color) {
      px[i] = static_cast<float>(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
    } else {
      px[i] = p[0];
    }
  }
  img.clamp_range();
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> raw;
  raw.reserve(img.data().size());
  for (float p : img.data()) raw.push_back(to_byte(p));
  return encode_png_raw(img.height(), img.width(), PNG_FORMAT_GRAY, raw);
}

std::vector<std::uint8_t> encode_png_rgb(std::size_t height, std::size_t width,
                                         std::span<const std::uint8_t> rgb) {
  if (rgb.size() != height * width * 3) throw ShapeError("encode_png_rgb: buffer size mismatch");
  return encode_png_raw(height, width, PNG_FORMAT_RGB, rgb);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

bool is_supported_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".pgm" || ext == ".png";
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext != ".pgm" && ext != ".png") {
    throw FormatError("unsupported image format '" + ext +
                          "'; convert to 8-bit PGM or PNG (e.g. `convert in" + ext + " out.pgm`)",
                      0);
  }
  const auto bytes = read_file(path);
  return ext == ".pgm" ? decode_pgm(bytes) : decode_png(bytes);
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  write_file(path, encode_pgm(img));
}

}  // namespace dsnet::io
