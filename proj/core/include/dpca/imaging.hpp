#pragma once

// Image pipelines built on the DPCA factorizations: background subtraction
// on frame stacks, patch-based denoising and mask-aware inpainting with OMP.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpca/image.hpp"
#include "dpca/matrix.hpp"
#include "dpca/solvers.hpp"

namespace dpca {

// ---------------------------------------------------------------------------
// Frame stacks and background subtraction

struct FrameStack {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Image> frames;

  std::size_t pixels() const noexcept { return height * width; }
  std::size_t size() const noexcept { return frames.size(); }
  /// pixels × frames; frame i is column i, pixels in row-major order.
  Matrix vectorized() const;
  /// Throws std::invalid_argument on mixed sizes or non-finite pixels.
  void validate() const;
};

/// Loads every *.pgm in `dir`, ordered by file name.
FrameStack load_frame_stack(const std::filesystem::path& dir);
/// Writes frame_0000.pgm, frame_0001.pgm, ...
void save_frame_stack(const std::filesystem::path& dir, const FrameStack& stack);

/// Masks travel as PGM images: 0 = false, anything else = true.
std::vector<bool> load_mask(const std::filesystem::path& path, std::size_t* height = nullptr,
                            std::size_t* width = nullptr);
void save_mask(const std::filesystem::path& path, const std::vector<bool>& mask,
               std::size_t height, std::size_t width);

struct ThresholdRule {
  enum class Kind { adaptive, fixed };
  Kind kind = Kind::adaptive;
  /// adaptive: τ = max(mean|r| + k_sigma·std|r|, floor) over the frame.
  double k_sigma = 2.0;
  double floor = 1.0;
  /// fixed: τ = value.
  double value = 0.0;

  static ThresholdRule fixed(double tau) { return {Kind::fixed, 2.0, 0.0, tau}; }
  double tau(std::span<const double> residual) const;
};

/// Factorizes the vectorized stack (pixels × frames, no centering).
/// Requires at least K frames.
DpcaFactorization bgsub_train(const FrameStack& stack, Solver solver, const DpcaConfig& cfg);

/// Least-squares background code of a frame: argmin_z ‖x − U z‖.
std::vector<double> background_code(const DpcaFactorization& f, std::span<const double> frame);

/// Foreground of training frame `index`: |x − U z_index| > τ.
std::vector<bool> bgsub_foreground(const DpcaFactorization& f, std::size_t index,
                                   std::span<const double> frame, const ThresholdRule& rule = {});
/// Foreground of an arbitrary frame, coded with background_code.
std::vector<bool> bgsub_foreground(std::span<const double> frame, const DpcaFactorization& f,
                                   const ThresholdRule& rule = {});

// ---------------------------------------------------------------------------
// Patches

struct PatchOrigin {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct PatchSet {
  std::size_t edge = 0;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  /// edge² × N; entry (c·edge + r, j) is pixel (r, c) of patch j.
  Matrix patches;
  std::vector<double> means;  ///< zero when means were not removed
  std::vector<PatchOrigin> origins;

  std::size_t count() const noexcept { return origins.size(); }
};

struct PatchSampling {
  std::size_t stride = 1;
  /// 0 keeps every position; otherwise a seeded uniform subsample of this size.
  std::size_t count_cap = 0;
  std::uint64_t seed = 1;
  bool remove_mean = true;
};

/// Throws std::invalid_argument when the image is smaller than the patch.
/// The last row and column of positions are always included so every pixel
/// is covered when count_cap is 0.
PatchSet extract_patches(const Image& img, std::size_t edge, const PatchSampling& sampling = {});

/// Averages every patch contribution per pixel, adding the stored means back.
/// Pixels no patch covers are copied from `fallback`, which must have the
/// image dimensions.
Image reconstruct_from_patches(const PatchSet& coded, const Image& fallback);

// ---------------------------------------------------------------------------
// Denoising

struct DenoiseConfig {
  std::size_t edge = 8;
  std::size_t K = 64;
  /// Patches used for training; all positions are coded at test time.
  std::size_t train_patches = 20000;
  std::uint64_t seed = 1;
  DpcaConfig dpca;
};

struct DenoiseResult {
  Image image;
  DpcaFactorization model;
};

/// Codes for a whole patch matrix with U frozen: one φ pass
/// (soft threshold of uₖᵀX projected onto the row space of X), then the firm
/// threshold when configured. The PCA baseline uses plain projections UᵀX.
Matrix code_patches(const DpcaFactorization& model, const Matrix& x, const DpcaConfig& cfg);

DenoiseResult denoise(const Image& noisy, Solver solver, const DenoiseConfig& cfg);

/// Adds N(0, σ²) noise (no clamping).
Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Inpainting

struct OmpResult {
  std::vector<double> z;
  std::vector<std::size_t> support;  ///< selection order
  std::vector<double> residual_norms;  ///< after each selection, starting with ‖M∘b‖
  bool recoverable = true;
};

/// Orthogonal matching pursuit on the known entries of b. Atoms are the
/// columns of `dict` restricted to known rows; selection uses normalized
/// correlation. Stops at `sparsity` atoms, residual < 1e-6 or when no
/// linearly independent atom remains. An all-unknown patch returns z = 0
/// flagged unrecoverable.
OmpResult omp_masked(std::span<const double> b, const std::vector<bool>& known,
                     const Matrix& dict, std::size_t sparsity);

struct InpaintTask {
  Image image;              ///< pixels under missing mask are ignored
  std::vector<bool> known;  ///< row-major, true = pixel known
  std::size_t sparsity = 20;
  std::size_t edge = 8;
  std::size_t stride = 1;

  void validate() const;
};

struct InpaintResult {
  Image image;
  std::size_t unrecoverable_patches = 0;
};

/// Learns a dictionary (edge² × K, raw patches, no mean removal) from clean
/// training images. The dictionary is the U of the returned factorization.
DpcaFactorization train_dictionary(const std::vector<Image>& corpus, Solver solver,
                                   const DpcaConfig& cfg, std::size_t edge = 8,
                                   std::size_t patches_per_image = 1000, std::uint64_t seed = 1);

/// Codes every patch with omp_masked against `dict` plus a constant atom,
/// averages overlapping reconstructions and keeps known pixels exact.
/// Pixels no recoverable patch reaches get the mean of known pixels in a
/// growing neighbourhood.
InpaintResult inpaint(const InpaintTask& task, const Matrix& dict);

/// Copy of `img` with unknown pixels set to `fill`.
Image apply_mask(const Image& img, const std::vector<bool>& known, double fill = 0.0);

}  // namespace dpca
