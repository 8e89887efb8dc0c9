#pragma once

// Experiment runner behind the `dpca` command-line tool.
//
// A run is described by a flat key=value config (file plus overrides). Each
// command writes a metrics CSV into the output directory, appending when the
// file already exists with the same header, along with images or matrices
// where they apply.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpca/solvers.hpp"

namespace dpca {

enum class Command { synth, bgsub, denoise, inpaint, selftest };

std::string_view to_string(Command c) noexcept;
Command parse_command(std::string_view name);

enum class Sweep { none, noise, lambda };

struct ExperimentConfig {
  Command command = Command::selftest;
  std::vector<Solver> solvers{Solver::dpca1b};
  DpcaConfig dpca;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::filesystem::path out = "dpca-out";
  /// Optional external inputs. Empty paths select the shipped surrogates.
  std::filesystem::path input;   ///< image (denoise, inpaint) or frame directory (bgsub)
  std::filesystem::path mask;    ///< inpaint known-pixel mask, or bgsub truth directory
  std::filesystem::path corpus;  ///< inpaint dictionary training images

  // synth
  std::string overlap = "moderate";
  double eta_t = 0.9;
  double eta_s = 0.005;
  std::optional<double> spread;     ///< overrides the preset spread
  std::optional<double> amplitude;  ///< overrides the preset amplitude
  Sweep sweep = Sweep::none;
  std::size_t sweep_points = 8;
  std::vector<double> lambdas;  ///< grid for Sweep::lambda

  // imaging
  double psnr_in = 14.14;
  std::size_t patches = 5000;
  std::size_t patch_edge = 8;
  std::size_t sparsity = 20;
  double mask_fraction = 0.15;
  std::size_t corpus_patches = 1000;

  /// Worker cap; 0 reads DPCA_THREADS, falling back to the hardware count.
  std::size_t threads = 0;

  /// Defaults for each command (K, λ, firm levels, iteration cap).
  static ExperimentConfig defaults(Command command);

  /// Applies one key=value pair. Throws std::invalid_argument on an unknown
  /// key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_key_values() const;
  void validate() const;
  std::size_t worker_count() const;
};

/// Reads `command` from the file or overrides first, applies that command's
/// defaults, then the file, then the overrides.
ExperimentConfig load_experiment(const std::optional<std::filesystem::path>& file,
                                 const std::map<std::string, std::string>& overrides);

/// Runs the experiment; progress lines go to `log`. Returns the exit status.
int run(const ExperimentConfig& cfg, std::ostream& log);

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr const char* kImagingHeader =
    "case,algorithm,lambda,rho1,rho2,K,psnr_in,psnr_out,sse,precision,recall,fscore,seconds";
inline constexpr const char* kSynthHeader =
    "row,case,algorithm,lambda,rho1,rho2,K,seed,eta_t,eta_s,mean_correlation,fscore,"
    "explained_variance,iterations,converged,seconds";

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Field of row `r` by column name; throws when the column is missing.
  const std::string& field(std::size_t r, const std::string& column) const;
};

CsvTable read_csv_table(const std::filesystem::path& path);

/// Parameters recorded in one metrics row, enough to re-create the run.
struct RecordedRun {
  std::string case_name;
  Solver solver = Solver::pca;
  double lambda = 0.0;
  std::optional<double> rho1;
  std::optional<double> rho2;
  std::size_t K = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta_t;
  std::optional<double> eta_s;
  std::optional<double> psnr_in;
};

RecordedRun parse_recorded_run(const CsvTable& table, std::size_t row);

// ---------------------------------------------------------------------------
// Self test

struct SelftestResult {
  std::size_t checks = 0;
  std::size_t failures = 0;
  bool ok() const noexcept { return failures == 0; }
};

/// Reduction to PCA at λ = 0 for every solver and the thresholding
/// identities. One line per check goes to `log`.
SelftestResult run_selftest(std::ostream& log, std::uint64_t seed = 1);

}  // namespace dpca
