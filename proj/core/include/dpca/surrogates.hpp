#pragma once

// Small synthetic inputs shipped in place of the video and photo datasets,
// so every image experiment runs without downloads.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dpca/image.hpp"
#include "dpca/imaging.hpp"

namespace dpca {

struct MovingSquareConfig {
  std::size_t size = 64;
  std::size_t frames = 60;
  std::size_t square = 8;
  double square_value = 240.0;
  double noise_sigma = 2.0;
  std::uint64_t seed = 1;
};

struct MovingSquareScene {
  FrameStack stack;
  Image background;  ///< noiseless static scene
  /// truth[i][v]: pixel v of frame i is covered by the square.
  std::vector<std::vector<bool>> truth;
};

/// Static textured background with a bright square bouncing around it. Pixel
/// values are whole numbers so the stack survives an 8-bit PGM round trip.
/// The square moves 3 px down and 2 px right per frame, reflecting at the
/// borders.
MovingSquareScene moving_square_stack(const MovingSquareConfig& cfg = {});

/// `frames` copies of the same noiseless background.
FrameStack static_stack(std::size_t size = 64, std::size_t frames = 60, std::uint64_t seed = 1);

/// Piecewise-smooth test image: a shaded backdrop with rectangles and
/// ellipses, each filled with its own linear intensity ramp. Values in [0, 255].
Image piecewise_smooth_image(std::size_t size = 256, std::uint64_t seed = 1);

/// Text rendered in a 5×7 bitmap font (scale 2) line by line until at least
/// `fraction` of the pixels are covered. Returns the known-pixel mask
/// (true = not covered by text). The glyph grid tops out near 20% coverage;
/// larger fractions throw std::invalid_argument.
std::vector<bool> text_mask(std::size_t rows, std::size_t cols, double fraction = 0.15,
                            std::uint64_t seed = 1);

/// Clean images for dictionary training; seeds differ from any test image.
std::vector<Image> training_corpus(std::size_t count = 9, std::size_t size = 128,
                                   std::uint64_t seed = 101);

}  // namespace dpca
