#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dpca/factorization_io.hpp"
#include "dpca/matrix_io.hpp"
#include "dpca/solvers.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using dpca::Matrix;

TEST_CASE("format_double round trips") {
  dpca::Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.index(40)) - 20.0);
    CHECK(std::stod(dpca::format_double(v)) == v);
  }
  CHECK(dpca::format_double(0.5) == "0.5");
}

TEST_CASE("CSV and binary matrices") {
  const Matrix m = testing::random_matrix(4, 3, 13);
  std::stringstream csv;
  dpca::write_csv(csv, m);
  CHECK(dpca::read_csv(csv) == m);

  std::stringstream bin;
  dpca::write_binary(bin, m);
  CHECK(bin.str().size() == 8 + 12 * 8);
  CHECK(dpca::read_binary(bin) == m);

  const auto dir = fs::temp_directory_path() / "dpca-test-io";
  fs::create_directories(dir);
  dpca::save_matrix(dir / "m.csv", m);
  dpca::save_matrix(dir / "m.bin", m);
  CHECK(dpca::load_matrix(dir / "m.csv") == m);
  CHECK(dpca::load_matrix(dir / "m.bin") == m);
  fs::remove_all(dir);

  std::stringstream ragged("1,2\n3\n");
  CHECK_THROWS(dpca::read_csv(ragged));
}

TEST_CASE("key=value files") {
  const auto path = fs::temp_directory_path() / "dpca-test-kv";
  dpca::write_key_values(path, {{"a", "1"}, {"b", "x y"}});
  const auto kv = dpca::read_key_values(path);
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("b") == "x y");
  fs::remove(path);
}

TEST_CASE("factorization round trip") {
  const Matrix x = testing::random_matrix(12, 9, 14);
  dpca::DpcaConfig cfg;
  cfg.K = 3;
  cfg.lambda = 0.5;
  cfg.firm = dpca::FirmThresholds(0.1, 0.4);
  const auto f = dpca::fit(dpca::Solver::dpca2, x, cfg);
  const auto meta = dpca::make_meta(f, cfg, dpca::explained_variance(x, f.Z));
  const auto dir = fs::temp_directory_path() / "dpca-test-fact";
  fs::remove_all(dir);
  dpca::save_factorization(dir, f, meta);
  const auto back = dpca::load_factorization(dir);
  CHECK(back.factorization.U == f.U);
  CHECK(back.factorization.Z == f.Z);
  CHECK(back.meta.solver == dpca::Solver::dpca2);
  CHECK(back.meta.rho1.value() == 0.1);
  CHECK(back.meta.K == 3);
  fs::remove_all(dir);
}
