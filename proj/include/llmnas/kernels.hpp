#pragma once

#include <span>
#include <string>
#include <vector>

#include "llmnas/arch_space.hpp"
#include "llmnas/pareto.hpp"
#include "llmnas/resource_estimator.hpp"

// Data-parallel batch kernels. Each OpenMP kernel has a serial twin with the
// same contract; tests check that they agree and the benchmark compares them.
namespace llmnas::kernels {

std::vector<ResourceEstimate> estimate_batch(std::span<const ArchitectureConfig> archs,
                                             const SearchSpace& space);
std::vector<ResourceEstimate> estimate_batch_serial(std::span<const ArchitectureConfig> archs,
                                                    const SearchSpace& space);

std::vector<std::string> hash_batch(std::span<const ArchitectureConfig> archs);
std::vector<std::string> hash_batch_serial(std::span<const ArchitectureConfig> archs);

// Ascending indices of the records no other record dominates. Of several
// records sharing metrics and arch_hash only the first is kept, matching
// ParetoFront::update.
std::vector<std::size_t> nondominated_indices(std::span<const CandidateRecord> records);
std::vector<std::size_t> nondominated_indices_serial(std::span<const CandidateRecord> records);

int max_threads();

}  // namespace llmnas::kernels
