#pragma once

// Synthetic blind-source-separation scenes in the style of fMRI simulation
// toolboxes: DCT time courses mixed with Gaussian-blob spatial maps, plus the
// source-recovery metrics used to score a factorization against them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dpca/matrix.hpp"

namespace dpca {

/// One anisotropic Gaussian activation on the grid. Coordinates are in pixels;
/// the blob's standard deviations are spread·axis_row and spread·axis_col
/// before rotation by `angle` (radians).
struct BlobParams {
  double center_row = 0.0;
  double center_col = 0.0;
  double angle = 0.0;
  double axis_row = 1.0;
  double axis_col = 1.0;
  /// Peak of this map relative to SynthConfig::amplitude.
  double weight = 1.0;
};

enum class OverlapPreset { moderate, significant };

struct SynthConfig {
  std::size_t n_sources = 8;
  std::size_t n_time = 240;
  std::size_t grid = 70;
  std::vector<std::size_t> dct_bases{3, 11, 19, 27, 35, 43, 51, 59};
  /// Mean ρ of the per-source spread ~ N(ρ, spread_variance).
  double spread = 6.0;
  double spread_variance = 0.05;
  double eta_t = 0.9;    ///< temporal noise variance
  double eta_s = 0.005;  ///< spatial noise variance
  /// Peak value of a weight-1 noiseless spatial map.
  double amplitude = 3.5;
  /// Seeds the noise matrices Ω and Γ.
  std::uint64_t seed = 1;
  /// Seeds the spread draws, so maps stay fixed while `seed` varies.
  std::uint64_t layout_seed = 7;
  std::vector<BlobParams> blobs;

  /// The shipped eight-blob layout with spread 6 (moderate) or 12 (significant).
  static SynthConfig preset(OverlapPreset overlap);
  /// The eight-blob layout without spread-dependent changes.
  static std::vector<BlobParams> default_layout();

  std::size_t voxels() const noexcept { return grid * grid; }
  void validate() const;
};

struct SynthScene {
  Matrix PC;  ///< n_time × n_sources, zero mean and unit variance per column
  Matrix LV;  ///< n_sources × voxels, noiseless maps
  Matrix X;   ///< (PC + Ω)(LV + Γ)
  /// masks[i][v]: voxel v belongs to source i (map above e⁻² of its peak).
  std::vector<std::vector<bool>> masks;
  std::vector<double> spreads;  ///< realized spread per source
};

SynthScene generate_scene(const SynthConfig& cfg);

/// DCT-II basis vector of the given index, standardized (mean 0, sample variance 1).
std::vector<double> dct_time_course(std::size_t length, std::size_t basis);

/// Writes X.csv, PC.csv, LV.csv, a key=value `manifest` and lv_<i>.pgm images.
void export_scene(const std::filesystem::path& dir, const SynthConfig& cfg, const SynthScene& scene);

/// Pearson correlation; zero when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Hungarian algorithm on a square score matrix. Returns col_of_row maximizing
/// the summed score.
std::vector<std::size_t> assign_max(const Matrix& score);

struct SourceMatch {
  /// recovered_row[j] is the recovered row matched to truth row j.
  std::vector<std::size_t> recovered_row;
  /// Sign applied to that recovered row so its correlation is ≥ 0.
  std::vector<int> signs;
  std::vector<double> correlations;  ///< per truth row, ≥ 0
  double mean_correlation = 0.0;
};

/// One-to-one matching maximizing total |Pearson correlation|. Both inputs
/// are K×p with equal K.
SourceMatch match_sources(const Matrix& recovered, const Matrix& truth);

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

/// Pixel set precision/recall/F1. An empty detection scores precision 0.
DetectionScores score_masks(const std::vector<bool>& detected, const std::vector<bool>& truth);

/// Activity rule for loading maps: |value| > relative·max|row|.
struct BinarizeRule {
  double relative = 0.5;
};

std::vector<bool> binarize(std::span<const double> row, BinarizeRule rule = {});

/// Throws std::invalid_argument if `truth` has no active pixel.
DetectionScores fscore_maps(std::span<const double> recovered, const std::vector<bool>& truth,
                            BinarizeRule rule = {});

}  // namespace dpca
