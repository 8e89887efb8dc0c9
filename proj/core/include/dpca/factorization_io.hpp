#pragma once

// A factorization on disk is a directory holding U.csv, Z.csv, psi.csv,
// phi.csv and a key=value `meta` file.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "dpca/solvers.hpp"

namespace dpca {

struct FactorizationMeta {
  Solver solver = Solver::pca;
  double lambda = 0.0;
  std::optional<double> rho1;
  std::optional<double> rho2;
  std::size_t K = 0;
  std::size_t iterations_run = 0;
  bool converged = false;
  double explained_variance = 0.0;
};

FactorizationMeta make_meta(const DpcaFactorization& f, const DpcaConfig& cfg,
                            double explained_variance);

void save_factorization(const std::filesystem::path& dir, const DpcaFactorization& f,
                        const FactorizationMeta& meta);

struct LoadedFactorization {
  DpcaFactorization factorization;
  FactorizationMeta meta;
};
LoadedFactorization load_factorization(const std::filesystem::path& dir);

/// Reads `key=value` lines; blank lines and lines starting with '#' are skipped.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& kv);

}  // namespace dpca
