#include "lsdat/image.hpp"

#include <cmath>
#include <cstring>

#include "lsdat/errors.hpp"

namespace lsdat {

namespace {

void require_same_shape(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) {
    throw ConfigError("image shape mismatch: " + std::to_string(a.height) + "x" +
                      std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                      std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                      std::to_string(b.channels));
  }
}

}  // namespace

bool ImageTensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ImageTensor::validate() const {
  if (height < 1 || width < 1 || channels < 1) {
    throw ConfigError("image dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ConfigError("image buffer size does not match dimensions");
  }
  if (!all_finite()) {
    throw ConfigError("image contains non-finite entries");
  }
}

bool operator==(const ImageTensor& a, const ImageTensor& b) {
  return a.same_shape(b) && a.data == b.data;
}

ImageTensor operator+(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b);
  ImageTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

ImageTensor operator-(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b);
  ImageTensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

ImageTensor operator*(double s, const ImageTensor& a) {
  ImageTensor out = a;
  for (double& v : out.data) v *= s;
  return out;
}

Eigen::MatrixXd channel_matrix(const ImageTensor& img, int ch) {
  Eigen::MatrixXd m(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      m(y, x) = img.at(y, x, ch);
    }
  }
  return m;
}

void set_channel(ImageTensor& img, int ch, const Eigen::MatrixXd& m) {
  if (m.rows() != img.height || m.cols() != img.width) {
    throw ConfigError("channel matrix shape does not match image");
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      img.at(y, x, ch) = m(y, x);
    }
  }
}

std::uint64_t content_hash(const ImageTensor& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(img.height));
  mix(static_cast<std::uint64_t>(img.width));
  mix(static_cast<std::uint64_t>(img.channels));
  for (double v : img.data) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  }
  return h;
}

}  // namespace lsdat
