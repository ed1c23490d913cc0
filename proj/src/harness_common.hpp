#pragma once

#include <cstdint>
#include <memory>

#include "sparsegrad/harness.hpp"

namespace sparsegrad {

// Stream tags for Rng::fork. Data depends only on the data seed; parameter
// initialization and batch order come from the run seed.
inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kInitStream = 2;
inline constexpr std::uint64_t kBatchStream = 3;

std::unique_ptr<HarnessModel> make_channel_harness(const ExperimentConfig& c);
std::unique_ptr<HarnessModel> make_wiring_harness(const ExperimentConfig& c);
std::unique_ptr<HarnessModel> make_gcn_harness(const ExperimentConfig& c);

}  // namespace sparsegrad
