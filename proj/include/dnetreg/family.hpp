#pragma once

#include <string>

namespace dnetreg {

/// Canonical exponential families: the link inverse equals the cumulant
/// derivative, so only the cumulant psi and its derivatives are needed.
enum class Family { kBernoulli, kGaussian, kPoisson };

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

/// Cumulant psi(eta). The bernoulli branch is overflow-safe:
/// log1p(exp(eta)) for eta <= 0 and eta + log1p(exp(-eta)) otherwise.
double psi(Family f, double eta);

/// Mean function psi'(eta) = g^{-1}(eta).
double psi_prime(Family f, double eta);

/// Variance function psi''(eta).
double psi_second(Family f, double eta);

/// Upper bound on |psi''| used for step sizing. Bernoulli: 1/4.
/// Gaussian: 1. Poisson has no global bound, so the bound is taken at
/// the largest |eta| the caller expects to see.
double curvature_bound(Family f, double eta_abs_max);

/// Checks that an observed edge value is admissible for the family
/// (binary for bernoulli, nonnegative integer for poisson).
bool valid_edge_value(Family f, double a);

}  // namespace dnetreg
