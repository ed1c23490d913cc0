#pragma once
// Self-check suites shared by the command-line tool and the test binaries.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sparsegrad/proximal.hpp"

namespace sparsegrad {

struct CheckResult {
  std::string name;
  std::size_t points = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return points > 0 && max_error < tolerance; }
};

bool all_passed(const std::vector<CheckResult>& results);

/// Autodiff against central differences (h = 1e-5) for every
/// differentiable op and for the gate, penalty, adjacency and unrolled
/// normalization composites. Inputs within 1e-3 of a kink are redrawn.
std::vector<CheckResult> grad_check_suite(std::size_t points = 100, std::uint64_t seed = 1,
                                          double tolerance = 1e-4);

/// prox_step against the grid argmin on random scalar and 2-vector inputs
/// for l1, group-l21 and exclusive-l12.
std::vector<CheckResult> prox_check_suite(std::size_t instances = 50, std::uint64_t seed = 2,
                                          double tolerance = 1e-3);

/// Doubly stochastic residual of sinkhorn and balanced normalization on
/// random positive matrices with N <= 10, plus invariance under scaling the input.
std::vector<CheckResult> sinkhorn_check_suite(std::size_t matrices = 50, std::uint64_t seed = 3,
                                              double tolerance = 1e-8);

}  // namespace sparsegrad
