#include "llmnas/kernels.hpp"

#include <exception>

#include <omp.h>

namespace llmnas::kernels {

namespace {

bool same_entry(const CandidateRecord& a, const CandidateRecord& b) {
    return a.accuracy == b.accuracy && a.macs == b.macs && a.params == b.params &&
           a.arch_hash == b.arch_hash;
}

bool kept(std::span<const CandidateRecord> records, std::size_t i) {
    for (std::size_t j = 0; j < records.size(); ++j) {
        if (j == i) continue;
        if (dominates(records[j], records[i])) return false;
        if (j < i && same_entry(records[j], records[i])) return false;
    }
    return true;
}

// Runs body(i) for i in [0, n) across threads; the first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body body) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(llmnas_kernel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

std::vector<ResourceEstimate> estimate_batch(std::span<const ArchitectureConfig> archs,
                                             const SearchSpace& space) {
    std::vector<ResourceEstimate> out(archs.size());
    parallel_for(archs.size(), [&](std::size_t i) { out[i] = estimate(archs[i], space); });
    return out;
}

std::vector<ResourceEstimate> estimate_batch_serial(std::span<const ArchitectureConfig> archs,
                                                    const SearchSpace& space) {
    std::vector<ResourceEstimate> out;
    out.reserve(archs.size());
    for (const auto& a : archs) out.push_back(estimate(a, space));
    return out;
}

std::vector<std::string> hash_batch(std::span<const ArchitectureConfig> archs) {
    std::vector<std::string> out(archs.size());
    parallel_for(archs.size(), [&](std::size_t i) { out[i] = canonical_hash(archs[i]); });
    return out;
}

std::vector<std::string> hash_batch_serial(std::span<const ArchitectureConfig> archs) {
    std::vector<std::string> out;
    out.reserve(archs.size());
    for (const auto& a : archs) out.push_back(canonical_hash(a));
    return out;
}

std::vector<std::size_t> nondominated_indices(std::span<const CandidateRecord> records) {
    std::vector<char> keep(records.size(), 0);
    parallel_for(records.size(), [&](std::size_t i) { keep[i] = kept(records, i) ? 1 : 0; });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i]) out.push_back(i);
    return out;
}

std::vector<std::size_t> nondominated_indices_serial(std::span<const CandidateRecord> records) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (kept(records, i)) out.push_back(i);
    return out;
}

}  // namespace llmnas::kernels
