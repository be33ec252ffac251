#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace lsdat {

/// H x W x C array of intensities, row-major with interleaved channels:
/// data[(y * width + x) * channels + ch]. Attack inputs live in [0,1];
/// intermediate tensors (sparse components, perturbations) may not.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  static ImageTensor zeros(int h, int w, int c) { return ImageTensor(h, w, c); }
  static ImageTensor constant(int h, int w, int c, double v) { return ImageTensor(h, w, c, v); }

  std::size_t size() const { return data.size(); }

  double& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }

  bool same_shape(const ImageTensor& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  bool all_finite() const;

  /// Throws ConfigError on empty dims or non-finite entries.
  void validate() const;
};

bool operator==(const ImageTensor& a, const ImageTensor& b);

/// Elementwise arithmetic; shapes must match (ConfigError otherwise).
ImageTensor operator+(const ImageTensor& a, const ImageTensor& b);
ImageTensor operator-(const ImageTensor& a, const ImageTensor& b);
ImageTensor operator*(double s, const ImageTensor& a);

/// Extracts channel ch as an Eigen matrix (height x width).
Eigen::MatrixXd channel_matrix(const ImageTensor& img, int ch);

/// Writes a height x width matrix back into channel ch.
void set_channel(ImageTensor& img, int ch, const Eigen::MatrixXd& m);

/// FNV-1a over the dimensions and raw entry bit patterns. Stable across
/// runs; used to key replay traces.
std::uint64_t content_hash(const ImageTensor& img);

}  // namespace lsdat
