#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmnas/arch_space.hpp"

namespace llmnas {

struct TensorShape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::uint64_t elements() const {
        return std::uint64_t(height) * std::uint64_t(width) * std::uint64_t(channels);
    }
    bool operator==(const TensorShape&) const = default;
};

// Fixed stem and head around the searchable stages: 3x3/2 conv to 16 channels
// with BN, and global average pooling followed by a dense classifier.
inline constexpr int kStemChannels = 16;
inline constexpr int kStemKernel = 3;
inline constexpr int kStemStride = 2;
inline constexpr int kInputChannels = 3;

struct LayerShape {
    std::string label;
    TensorShape input;
    TensorShape output;
};

// Activation byte counts are int8, one byte per element.
struct LayerCost {
    std::string label;
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    std::uint64_t in_bytes = 0;
    std::uint64_t out_bytes = 0;
    std::uint64_t resident_extra_bytes = 0;

    std::uint64_t live_bytes() const { return in_bytes + out_bytes + resident_extra_bytes; }
    bool operator==(const LayerCost&) const = default;
};

struct ResourceEstimate {
    std::uint64_t total_macs = 0;
    std::uint64_t total_params = 0;
    std::uint64_t peak_sram_bytes = 0;
    std::uint64_t flash_bytes = 0;
    std::vector<LayerCost> layers;

    bool operator==(const ResourceEstimate&) const = default;
};

struct ConstraintSet {
    std::uint64_t macs_min = 70'000'000;
    std::uint64_t macs_max = 350'000'000;
    std::uint64_t sram_limit_bytes = 320 * 1024;

    bool operator==(const ConstraintSet&) const = default;
};

struct GateViolation {
    enum class Kind { MacsLow, MacsHigh, Sram };
    Kind kind;
    std::uint64_t current;
    // For MACs violations [lower, upper] is the allowed range; for SRAM only
    // `upper` (the limit) is meaningful.
    std::uint64_t lower;
    std::uint64_t upper;

    bool operator==(const GateViolation&) const = default;
};

std::string_view to_string(GateViolation::Kind kind);

struct GateVerdict {
    std::vector<GateViolation> violations;
    bool accepted() const { return violations.empty(); }
};

class DegenerateShape : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// out = ceil(in / stride), SAME padding.
constexpr int strided_extent(int in, int stride) { return (in + stride - 1) / stride; }

// Squeeze width of an SE block applied to `channels` channels.
int se_hidden_channels(int channels, double ratio);

// Layer-by-layer shapes: stem, every block of every stage (the stage stride is
// applied by block 1 only) and the head.
std::vector<LayerShape> propagate(const ArchitectureConfig& arch, TensorShape input,
                                  int num_classes);

ResourceEstimate estimate(const ArchitectureConfig& arch, TensorShape input, int num_classes);
ResourceEstimate estimate(const ArchitectureConfig& arch, const SearchSpace& space);

GateVerdict check_constraints(const ResourceEstimate& est, const ConstraintSet& limits);

nlohmann::ordered_json estimate_to_json(const ResourceEstimate& est);
nlohmann::ordered_json verdict_to_json(const GateVerdict& verdict);
GateVerdict verdict_from_json(const nlohmann::json& doc);
nlohmann::ordered_json constraints_to_json(const ConstraintSet& limits);
ConstraintSet constraints_from_json(const nlohmann::json& doc);

}  // namespace llmnas
