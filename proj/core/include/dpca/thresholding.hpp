#pragma once

// Shrinkage operators shared by every DPCA variant.

#include <span>
#include <vector>

namespace dpca {

/// Firm-threshold levels: values with |y| ≤ rho1 are killed, values with
/// |y| ≥ rho2 pass unchanged, and the gap in between is a linear ramp.
class FirmThresholds {
public:
  /// Throws std::invalid_argument unless 0 ≤ rho1 < rho2.
  FirmThresholds(double rho1, double rho2);

  /// ρ₁ = 0, ρ₂ = 1e12: numerically the identity for any realistic input.
  static FirmThresholds inert() { return {0.0, 1e12}; }

  double rho1() const noexcept { return rho1_; }
  double rho2() const noexcept { return rho2_; }

private:
  double rho1_;
  double rho2_;
};

/// Adaptive soft threshold sgn(y)·(|y| − λ/(2|y|))₊, i.e. soft thresholding with
/// the per-entry penalty λ/|y|. Zero wherever |y|² ≤ λ/2, and y = 0 maps to 0.
double soft_adaptive(double y, double lambda);
std::vector<double> soft_adaptive(std::span<const double> y, double lambda);
void soft_adaptive_inplace(std::span<double> y, double lambda);

double firm(double y, const FirmThresholds& t);
std::vector<double> firm(std::span<const double> y, const FirmThresholds& t);
void firm_inplace(std::span<double> y, const FirmThresholds& t);

}  // namespace dpca
