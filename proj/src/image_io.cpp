#include "lsdat/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include <png.h>

#include "lsdat/errors.hpp"

namespace lsdat {

namespace {

constexpr char kRawMagic[4] = {'L', 'S', 'D', 'R'};
constexpr std::uint8_t kRawVersion = 1;

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

png_uint_32 png_format_for_channels(int channels) {
  switch (channels) {
    case 1:
      return PNG_FORMAT_GRAY;
    case 2:
      return PNG_FORMAT_GA;
    case 3:
      return PNG_FORMAT_RGB;
    case 4:
      return PNG_FORMAT_RGBA;
    default:
      throw IoError("png images support 1, 2, 3 or 4 channels, not " +
                    std::to_string(channels));
  }
}

}  // namespace

ImageTensor read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;

  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw IoError("cannot read png " + path.string() + ": " + png.message);
  }

  // Normalize to 8-bit; keep alpha and gray-ness, expand palettes.
  const bool has_alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  const bool is_color =
      (png.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_COLORMAP)) != 0;
  if (is_color) {
    png.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  } else {
    png.format = has_alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY;
  }

  const int channels = PNG_IMAGE_PIXEL_CHANNELS(png.format);
  std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError("cannot decode png " + path.string() + ": " + message);
  }

  ImageTensor img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.data[i] = static_cast<double>(bytes[i]) / 255.0;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageTensor& img) {
  img.validate();
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = png_format_for_channels(img.channels);

  std::vector<unsigned char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }

  if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write png " + path.string() + ": " + png.message);
  }
}

ImageTensor read_raw_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open image " + path.string());
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kRawMagic, 4) != 0) {
    throw IoError("not a raw image file (bad magic): " + path.string());
  }
  char version = 0;
  in.read(&version, 1);
  if (!in || static_cast<std::uint8_t>(version) != kRawVersion) {
    throw IoError("unsupported raw image version in " + path.string());
  }
  const std::uint32_t h = read_u32(in);
  const std::uint32_t w = read_u32(in);
  const std::uint32_t c = read_u32(in);
  if (!in || h == 0 || w == 0 || c == 0 || h > 1 << 20 || w > 1 << 20 || c > 64) {
    throw IoError("implausible raw image dimensions in " + path.string());
  }
  ImageTensor img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.size() * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(img.size() * sizeof(double))) {
    throw IoError("truncated raw image file: " + path.string());
  }
  img.validate();
  return img;
}

void write_raw_image(const std::filesystem::path& path, const ImageTensor& img) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open image for writing: " + path.string());
  }
  out.write(kRawMagic, 4);
  const char version = static_cast<char>(kRawVersion);
  out.write(&version, 1);
  write_u32(out, static_cast<std::uint32_t>(img.height));
  write_u32(out, static_cast<std::uint32_t>(img.width));
  write_u32(out, static_cast<std::uint32_t>(img.channels));
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.size() * sizeof(double)));
  if (!out) {
    throw IoError("failed writing image " + path.string());
  }
}

ImageTensor read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    return read_png(path);
  }
  if (ext == ".lsdr") {
    return read_raw_image(path);
  }
  throw IoError("unsupported image format \"" + ext + "\" for " + path.string());
}

void write_image(const std::filesystem::path& path, const ImageTensor& img) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png(path, img);
  } else if (ext == ".lsdr") {
    write_raw_image(path, img);
  } else {
    throw IoError("unsupported image format \"" + ext + "\" for " + path.string());
  }
}

}  // namespace lsdat
