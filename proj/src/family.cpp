#include "dnetreg/family.hpp"

#include <cmath>
#include <stdexcept>

namespace dnetreg {

Family family_from_string(const std::string& s) {
  if (s == "bernoulli") return Family::kBernoulli;
  if (s == "gaussian") return Family::kGaussian;
  if (s == "poisson") return Family::kPoisson;
  throw std::invalid_argument("unknown family: " + s);
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::kBernoulli: return "bernoulli";
    case Family::kGaussian: return "gaussian";
    case Family::kPoisson: return "poisson";
  }
  return "?";
}

double psi(Family f, double eta) {
  switch (f) {
    case Family::kBernoulli:
      return eta > 0.0 ? eta + std::log1p(std::exp(-eta))
                       : std::log1p(std::exp(eta));
    case Family::kGaussian:
      return 0.5 * eta * eta;
    case Family::kPoisson:
      return std::exp(eta);
  }
  return 0.0;
}

double psi_prime(Family f, double eta) {
  switch (f) {
    case Family::kBernoulli:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                        : std::exp(eta) / (1.0 + std::exp(eta));
    case Family::kGaussian:
      return eta;
    case Family::kPoisson:
      return std::exp(eta);
  }
  return 0.0;
}

double psi_second(Family f, double eta) {
  switch (f) {
    case Family::kBernoulli: {
      const double m = psi_prime(f, eta);
      return m * (1.0 - m);
    }
    case Family::kGaussian:
      return 1.0;
    case Family::kPoisson:
      return std::exp(eta);
  }
  return 0.0;
}

double curvature_bound(Family f, double eta_abs_max) {
  switch (f) {
    case Family::kBernoulli: return 0.25;
    case Family::kGaussian: return 1.0;
    case Family::kPoisson: return std::exp(std::min(eta_abs_max, 50.0));
  }
  return 1.0;
}

bool valid_edge_value(Family f, double a) {
  switch (f) {
    case Family::kBernoulli:
      return a == 0.0 || a == 1.0;
    case Family::kGaussian:
      return std::isfinite(a);
    case Family::kPoisson:
      return a >= 0.0 && std::isfinite(a) && a == std::floor(a);
  }
  return false;
}

}  // namespace dnetreg
