#include "dpca/thresholding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpca {

FirmThresholds::FirmThresholds(double rho1, double rho2) : rho1_(rho1), rho2_(rho2) {
  if (!(rho1 >= 0.0) || !(rho1 < rho2) || !std::isfinite(rho2)) {
    throw std::invalid_argument("FirmThresholds: need 0 <= rho1 < rho2 (got " +
                                std::to_string(rho1) + ", " + std::to_string(rho2) + ")");
  }
}

double soft_adaptive(double y, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("soft_adaptive: lambda must be >= 0");
  if (lambda == 0.0) return y;
  const double mag = std::abs(y);
  if (mag == 0.0) return 0.0;
  const double shrunk = mag - lambda / (2.0 * mag);
  if (shrunk <= 0.0) return 0.0;
  return std::copysign(shrunk, y);
}

std::vector<double> soft_adaptive(std::span<const double> y, double lambda) {
  std::vector<double> out(y.begin(), y.end());
  soft_adaptive_inplace(out, lambda);
  return out;
}

void soft_adaptive_inplace(std::span<double> y, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("soft_adaptive: lambda must be >= 0");
  if (lambda == 0.0) return;
  for (double& v : y) v = soft_adaptive(v, lambda);
}

double firm(double y, const FirmThresholds& t) {
  const double mag = std::abs(y);
  if (mag <= t.rho1()) return 0.0;
  if (mag >= t.rho2()) return y;
  return std::copysign(t.rho2() * (mag - t.rho1()) / (t.rho2() - t.rho1()), y);
}

std::vector<double> firm(std::span<const double> y, const FirmThresholds& t) {
  std::vector<double> out(y.begin(), y.end());
  firm_inplace(out, t);
  return out;
}

void firm_inplace(std::span<double> y, const FirmThresholds& t) {
  for (double& v : y) v = firm(v, t);
}

}  // namespace dpca
