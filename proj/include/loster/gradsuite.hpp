#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loster/gradcheck.hpp"

namespace loster {

// Sizes for the finite-difference verification suite. The defaults keep a
// full sweep well under a minute.
struct GradSuiteConfig {
  std::size_t n = 10;
  std::size_t len = 12;
  std::size_t latent_dim = 6;
  std::size_t k = 3;
  std::size_t encoder_blocks = 2;
  std::size_t decoder_blocks = 2;
  double tau = 1.0;
  double sigma = 1.0;
  double tau_instance = 1.0;
  double tau_cluster = 1.0;
  double step = 1e-5;
  std::uint64_t seed = 7;
  // Test fixture: wraps the named loss ("reconstruction", "kmeans",
  // "instance", "cluster", "total") in an identity whose backward is
  // deliberately wrong, so the check must flag it.
  std::string inject_fault;
};

struct GradSuiteEntry {
  std::string loss;
  double max_rel_error = 0.0;
};

// Finite-difference check of every loss component on one random instance:
// dropout disabled, Gumbel noise frozen, and the discretization replaced by
// its soft relaxation (the straight-through surrogate gradient intentionally
// differs from the derivative of the piecewise-constant hard forward, so the
// hard path is not finite-difference checkable; its forward/backward contract
// is unit-tested exactly instead).
std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteConfig& cfg);

}  // namespace loster
