#include "dpca/surrogates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string_view>

#include "dpca/rng.hpp"

namespace dpca {

namespace {

struct Ramp {
  double base;
  double d_row;
  double d_col;
  double at(double r, double c) const { return base + d_row * r + d_col * c; }
};

Ramp random_ramp(Rng& rng, double lo, double hi, double slope) {
  return {lo + (hi - lo) * rng.uniform(), slope * (2.0 * rng.uniform() - 1.0),
          slope * (2.0 * rng.uniform() - 1.0)};
}

Image textured_background(std::size_t size, Rng& rng) {
  Image img(size, size);
  const double s = static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c)
      img(r, c) = std::round(60.0 + 50.0 * static_cast<double>(r) / s + 30.0 * static_cast<double>(c) / s);
  for (int i = 0; i < 5; ++i) {
    const std::size_t h = 6 + rng.index(size / 3);
    const std::size_t w = 6 + rng.index(size / 3);
    const std::size_t r0 = rng.index(size - h);
    const std::size_t c0 = rng.index(size - w);
    const double v = std::round(30.0 + 140.0 * rng.uniform());
    for (std::size_t r = r0; r < r0 + h; ++r)
      for (std::size_t c = c0; c < c0 + w; ++c) img(r, c) = v;
  }
  return img;
}

std::size_t bounce(long long start, long long step, std::size_t frame, std::size_t span) {
  const long long period = 2 * static_cast<long long>(span);
  if (period == 0) return 0;
  long long p = (start + step * static_cast<long long>(frame)) % period;
  if (p < 0) p += period;
  return static_cast<std::size_t>(p <= static_cast<long long>(span) ? p : period - p);
}

// 5×7 capitals, one string per row, '#' = ink.
struct Glyph {
  char ch;
  std::array<std::string_view, 7> rows;
};

constexpr std::array<Glyph, 26> kFont{{
    {'A', {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
    {'B', {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "}},
    {'C', {" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "}},
    {'D', {"#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "}},
    {'E', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"}},
    {'F', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "}},
    {'G', {" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"}},
    {'H', {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
    {'I', {" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
    {'J', {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "}},
    {'K', {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"}},
    {'L', {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"}},
    {'M', {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"}},
    {'N', {"#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"}},
    {'O', {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
    {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
    {'Q', {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"}},
    {'R', {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"}},
    {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
    {'T', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "}},
    {'U', {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
    {'V', {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "}},
    {'W', {"#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "}},
    {'X', {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"}},
    {'Y', {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "}},
    {'Z', {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"}},
}};

const Glyph* find_glyph(char ch) {
  for (const Glyph& g : kFont)
    if (g.ch == ch) return &g;
  return nullptr;
}

constexpr std::string_view kText = "THE QUICK BROWN FOX JUMPS OVER THE LAZY DOG ";

}  // namespace

MovingSquareScene moving_square_stack(const MovingSquareConfig& cfg) {
  if (cfg.size < cfg.square || cfg.square == 0 || cfg.frames == 0)
    throw std::invalid_argument("moving_square_stack: square must fit inside the frame");
  Rng layout(cfg.seed);
  MovingSquareScene scene;
  scene.background = textured_background(cfg.size, layout);
  const std::size_t span = cfg.size - cfg.square;
  const long long r_start = static_cast<long long>(layout.index(span + 1));
  const long long c_start = static_cast<long long>(layout.index(span + 1));

  Rng noise(cfg.seed + 0x9e3779b97f4a7c15ULL);
  scene.stack.height = cfg.size;
  scene.stack.width = cfg.size;
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    Image frame = scene.background;
    std::vector<bool> truth(cfg.size * cfg.size, false);
    const std::size_t r0 = bounce(r_start, 3, f, span);
    const std::size_t c0 = bounce(c_start, 2, f, span);
    for (std::size_t r = r0; r < r0 + cfg.square; ++r) {
      for (std::size_t c = c0; c < c0 + cfg.square; ++c) {
        frame(r, c) = cfg.square_value;
        truth[r * cfg.size + c] = true;
      }
    }
    for (double& v : frame.data()) v = std::round(v + cfg.noise_sigma * noise.normal());
    clamp_pixels(frame);
    scene.stack.frames.push_back(std::move(frame));
    scene.truth.push_back(std::move(truth));
  }
  return scene;
}

FrameStack static_stack(std::size_t size, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  const Image bg = textured_background(size, rng);
  FrameStack stack;
  stack.height = size;
  stack.width = size;
  stack.frames.assign(frames, bg);
  return stack;
}

Image piecewise_smooth_image(std::size_t size, std::uint64_t seed) {
  if (size < 8) throw std::invalid_argument("piecewise_smooth_image: size must be >= 8");
  Rng rng(seed);
  const double s = static_cast<double>(size);
  Image img(size, size);
  const Ramp backdrop = random_ramp(rng, 70.0, 150.0, 60.0 / s);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c)
      img(r, c) = backdrop.at(static_cast<double>(r), static_cast<double>(c));

  for (int i = 0; i < 7; ++i) {
    const double h = s * (0.1 + 0.3 * rng.uniform());
    const double w = s * (0.1 + 0.3 * rng.uniform());
    const double r0 = (s - h) * rng.uniform();
    const double c0 = (s - w) * rng.uniform();
    const Ramp fill = random_ramp(rng, 20.0, 235.0, 40.0 / s);
    for (std::size_t r = static_cast<std::size_t>(r0); r < static_cast<std::size_t>(r0 + h); ++r)
      for (std::size_t c = static_cast<std::size_t>(c0); c < static_cast<std::size_t>(c0 + w); ++c)
        img(r, c) = fill.at(static_cast<double>(r) - r0, static_cast<double>(c) - c0);
  }
  for (int i = 0; i < 6; ++i) {
    const double cr = s * rng.uniform();
    const double cc = s * rng.uniform();
    const double ar = s * (0.05 + 0.15 * rng.uniform());
    const double ac = s * (0.05 + 0.15 * rng.uniform());
    const Ramp fill = random_ramp(rng, 20.0, 235.0, 40.0 / s);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double dr = (static_cast<double>(r) - cr) / ar;
        const double dc = (static_cast<double>(c) - cc) / ac;
        if (dr * dr + dc * dc <= 1.0) img(r, c) = fill.at(dr * ar, dc * ac);
      }
    }
  }
  clamp_pixels(img);
  return img;
}

std::vector<bool> text_mask(std::size_t rows, std::size_t cols, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("text_mask: fraction must be in [0, 1)");
  constexpr std::size_t kScale = 2;
  constexpr std::size_t kAdvance = 6 * kScale;
  constexpr std::size_t kLine = 10 * kScale;
  std::vector<bool> known(rows * cols, true);
  const std::size_t target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows * cols)));
  std::size_t covered = 0;

  Rng rng(seed);
  std::size_t cursor = rng.index(kText.size());
  const std::size_t top = rng.index(kLine);
  for (std::size_t y = top; y + 7 * kScale <= rows && covered < target; y += kLine) {
    for (std::size_t x = 2; x + 5 * kScale <= cols && covered < target; x += kAdvance) {
      const Glyph* g = find_glyph(kText[cursor]);
      cursor = (cursor + 1) % kText.size();
      if (!g) continue;
      for (std::size_t gr = 0; gr < 7; ++gr)
        for (std::size_t gc = 0; gc < 5; ++gc) {
          if (g->rows[gr][gc] != '#') continue;
          for (std::size_t dy = 0; dy < kScale; ++dy)
            for (std::size_t dx = 0; dx < kScale; ++dx) {
              const std::size_t idx = (y + gr * kScale + dy) * cols + x + gc * kScale + dx;
              if (known[idx]) {
                known[idx] = false;
                ++covered;
              }
            }
        }
    }
  }
  if (covered < target)
    throw std::invalid_argument("text_mask: the text grid cannot cover the requested fraction");
  return known;
}

std::vector<Image> training_corpus(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(piecewise_smooth_image(size, seed + i));
  return out;
}

}  // namespace dpca
