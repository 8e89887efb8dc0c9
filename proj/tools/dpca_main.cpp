// dpca: run the synthetic, background-subtraction, denoising and inpainting
// experiments, or the built-in self test.
//
//   dpca synth --solver pca,dpca1b,dpca2 --trials 15 --out runs/synth
//   dpca denoise --config denoise.cfg --lambda 9000 --rho1 15 --rho2 50
//   dpca bgsub --input frames/ --mask truth/ --k 5
//
// Any config key can also be passed as `--key value`.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpca/harness.hpp"

namespace {

// Turns leftover `--key value` and `--key=value` arguments into overrides.
std::map<std::string, std::string> extra_overrides(const std::vector<std::string>& rest) {
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0) throw std::invalid_argument("unexpected argument '" + a + "'");
    const std::string body = a.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out[body.substr(0, eq)] = body.substr(eq + 1);
    } else if (i + 1 < rest.size()) {
      out[body] = rest[++i];
    } else {
      throw std::invalid_argument("missing value for '" + a + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissociative PCA experiments"};
  app.require_subcommand(1);

  std::optional<std::string> config;
  std::map<std::string, std::string> flags;
  auto flag = [&flags](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };

  for (const char* name : {"synth", "bgsub", "denoise", "inpaint", "selftest"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->allow_extras();
    sub->add_option("--config", config, "key=value config file");
    flag(sub, "--solver", "solver", "pca, dpca1a, dpca1b or dpca2 (comma separated list allowed)");
    flag(sub, "--lambda", "lambda", "sparsity penalty");
    flag(sub, "--rho1", "rho1", "firm threshold kill level");
    flag(sub, "--rho2", "rho2", "firm threshold keep level");
    flag(sub, "--k", "K", "number of components");
    flag(sub, "--trials", "trials", "number of seeded trials");
    flag(sub, "--seed", "seed", "base seed");
    flag(sub, "--out", "out", "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error=config message=" << e.what() << '\n';
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  dpca::ExperimentConfig cfg;
  try {
    std::map<std::string, std::string> overrides = extra_overrides(sub->remaining());
    for (const auto& [k, v] : flags) overrides[k] = v;
    overrides["command"] = sub->get_name();
    std::optional<std::filesystem::path> file;
    if (config) file = *config;
    cfg = dpca::load_experiment(file, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error=config message=" << e.what() << '\n';
    return 2;
  }
  return dpca::run(cfg, std::cout);
}
