#pragma once

#include <filesystem>

#include "lsdat/image.hpp"

namespace lsdat {

/// Reads a .png (8-bit gray / gray+alpha / RGB / RGBA; palette and
/// 16-bit inputs are converted) with intensities mapped to [0,1] by
/// dividing by 255, or a .lsdr raw float64 tensor. Dispatch is by file
/// extension; anything else is an IoError.
ImageTensor read_image(const std::filesystem::path& path);

/// Writes a .png (values clamped to [0,1] and quantized to 8 bits;
/// channels must be 1, 2, 3 or 4) or a .lsdr tensor (lossless).
void write_image(const std::filesystem::path& path, const ImageTensor& img);

// The .lsdr sidecar format carries synthetic fixtures without
// quantization: "LSDR", version byte 1, uint32 height/width/channels,
// then row-major interleaved float64 samples, all little-endian.
ImageTensor read_raw_image(const std::filesystem::path& path);
void write_raw_image(const std::filesystem::path& path, const ImageTensor& img);

ImageTensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageTensor& img);

}  // namespace lsdat
