#include "dpca/factorization_io.hpp"

#include <fstream>
#include <stdexcept>

#include "dpca/matrix_io.hpp"

namespace dpca {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("factorization meta: missing key '" + key + "'");
  return it->second;
}

}  // namespace

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_key_values(const std::filesystem::path& path,
                      const std::map<std::string, std::string>& kv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

FactorizationMeta make_meta(const DpcaFactorization& f, const DpcaConfig& cfg,
                            double explained_variance) {
  FactorizationMeta m;
  m.solver = f.solver;
  m.lambda = f.lambda_used;
  if (cfg.firm && (f.solver == Solver::dpca1b || f.solver == Solver::dpca2)) {
    m.rho1 = cfg.firm->rho1();
    m.rho2 = cfg.firm->rho2();
  }
  m.K = f.K();
  m.iterations_run = f.iterations_run;
  m.converged = f.converged;
  m.explained_variance = explained_variance;
  return m;
}

void save_factorization(const std::filesystem::path& dir, const DpcaFactorization& f,
                        const FactorizationMeta& meta) {
  std::filesystem::create_directories(dir);
  save_csv(dir / "U.csv", f.U);
  save_csv(dir / "Z.csv", f.Z);
  save_csv(dir / "psi.csv", f.state.psi);
  save_csv(dir / "phi.csv", f.state.phi);
  std::map<std::string, std::string> kv{
      {"solver", std::string(to_string(meta.solver))},
      {"lambda", format_double(meta.lambda)},
      {"rho1", meta.rho1 ? format_double(*meta.rho1) : "none"},
      {"rho2", meta.rho2 ? format_double(*meta.rho2) : "none"},
      {"K", std::to_string(meta.K)},
      {"iterations_run", std::to_string(meta.iterations_run)},
      {"converged", meta.converged ? "true" : "false"},
      {"explained_variance", format_double(meta.explained_variance)},
  };
  write_key_values(dir / "meta", kv);
}

LoadedFactorization load_factorization(const std::filesystem::path& dir) {
  LoadedFactorization out;
  const auto kv = read_key_values(dir / "meta");
  FactorizationMeta& m = out.meta;
  if (auto it = kv.find("solver"); it != kv.end()) m.solver = parse_solver(it->second);
  m.lambda = std::stod(require_key(kv, "lambda"));
  const auto& r1 = require_key(kv, "rho1");
  const auto& r2 = require_key(kv, "rho2");
  if (r1 != "none") m.rho1 = std::stod(r1);
  if (r2 != "none") m.rho2 = std::stod(r2);
  m.K = std::stoul(require_key(kv, "K"));
  m.iterations_run = std::stoul(require_key(kv, "iterations_run"));
  m.converged = require_key(kv, "converged") == "true";
  m.explained_variance = std::stod(require_key(kv, "explained_variance"));

  DpcaFactorization& f = out.factorization;
  f.solver = m.solver;
  f.U = load_csv(dir / "U.csv");
  f.Z = load_csv(dir / "Z.csv");
  f.state.psi = load_csv(dir / "psi.csv");
  f.state.phi = load_csv(dir / "phi.csv");
  f.V = matmul(f.state.psi, f.state.phi);
  f.iterations_run = m.iterations_run;
  f.converged = m.converged;
  f.lambda_used = m.lambda;
  if (f.U.cols() != m.K || f.Z.rows() != m.K) {
    throw std::runtime_error("factorization in " + dir.string() + " does not match K in meta");
  }
  return out;
}

}  // namespace dpca
