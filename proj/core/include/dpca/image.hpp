#pragma once

// Grayscale images as matrices (rows = height) and PGM interchange.

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>

#include "dpca/matrix.hpp"

namespace dpca {

using Image = Matrix;

/// Reads binary (P5) or ASCII (P2) PGM. 16-bit maxval is rejected. Values
/// are rescaled to [0, 255] when maxval differs from 255.
Image load_pgm(const std::filesystem::path& path);

/// Writes 8-bit P5; values are rounded and clamped to [0, 255].
void save_pgm(const std::filesystem::path& path, const Image& img);

/// Reshapes a length h·w vector (row-major) and min-max stretches it to
/// [0, 255] for viewing. A constant vector maps to 0.
Image map_to_image(std::span<const double> values, std::size_t height, std::size_t width);

/// Returned by psnr for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10·log₁₀(peak²/MSE). Throws std::invalid_argument on shape mismatch.
double psnr(const Image& a, const Image& b, double peak = 255.0);

/// Σ(a − b)².
double sse(const Image& a, const Image& b);

/// Noise σ that puts a [0, peak] image at the given PSNR.
double sigma_for_psnr(double psnr_db, double peak = 255.0);

void clamp_pixels(Image& img, double lo = 0.0, double hi = 255.0);

}  // namespace dpca
