#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace llmnas {

enum class ConvBlock { DWSepConv, MBConv };
enum class Activation { ReLU6, LeakyReLU, Swish };
enum class CandidateSource { Llm, Replay, Manual };

std::string_view to_string(ConvBlock block);
std::string_view to_string(Activation act);
std::string_view to_string(CandidateSource source);
std::optional<ConvBlock> conv_block_from_string(std::string_view name);
std::optional<Activation> activation_from_string(std::string_view name);
std::optional<CandidateSource> candidate_source_from_string(std::string_view name);

// Choice lists for one stage of the N-stage skeleton plus the fixed task
// parameters. Default-constructed instance is the 5-stage, 160x160, 100-class
// space used throughout the search.
struct SearchSpace {
    int stage_count = 5;
    std::vector<int> out_channel_choices{16, 24, 32, 48, 64, 96, 128, 160};
    std::vector<int> kernel_choices{3, 5, 7};
    std::vector<int> stride_choices{1, 2};
    std::vector<int> expansion_choices{3, 4, 6};
    std::vector<bool> se_enable_choices{true, false};
    std::vector<double> se_ratio_choices{0.25, 0.5};
    std::vector<ConvBlock> conv_block_choices{ConvBlock::DWSepConv, ConvBlock::MBConv};
    std::vector<bool> skip_choices{true, false};
    std::vector<Activation> activation_choices{Activation::ReLU6, Activation::LeakyReLU,
                                               Activation::Swish};
    std::vector<int> layers_choices{1, 2, 3, 4, 6};
    int input_resolution = 160;
    int num_classes = 100;

    bool operator==(const SearchSpace&) const = default;
};

// One stage; all L_i blocks of the stage share this configuration.
// `expansion` is only meaningful for MBConv but is always carried.
struct StageConfig {
    int out_channels = 16;
    int kernel = 3;
    int stride = 1;
    int expansion = 3;
    bool se = false;
    std::optional<double> se_ratio;
    ConvBlock conv_block = ConvBlock::DWSepConv;
    bool skip = false;
    Activation activation = Activation::ReLU6;
    int layers = 1;

    bool operator==(const StageConfig&) const = default;
};

struct ArchitectureConfig {
    std::vector<StageConfig> stages;
    std::string candidate_id;
    CandidateSource source = CandidateSource::Manual;

    bool operator==(const ArchitectureConfig&) const = default;
};

struct Violation {
    enum class Kind { Field, StageCount, Missing };
    Kind kind = Kind::Field;
    std::optional<int> stage;  // 1-based
    std::string field;
    std::string value;
    std::string allowed;

    std::string describe() const;
    bool operator==(const Violation&) const = default;
};

struct ValidationVerdict {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Malformed documents and schema problems are failures; space violations are
// reported as data by the validate_* functions and wrapped here by parsing.
class ParseError : public std::runtime_error {
public:
    enum class Kind { Malformed, Schema, Space };
    ParseError(Kind kind, std::vector<std::string> details);

    Kind kind() const { return kind_; }
    const std::vector<std::string>& details() const { return details_; }

private:
    Kind kind_;
    std::vector<std::string> details_;
};

std::string_view to_string(ParseError::Kind kind);

// Throws std::invalid_argument if a choice list is empty, has duplicates or
// holds values outside their domain.
void check_search_space(const SearchSpace& space);

ValidationVerdict validate_stage(const StageConfig& stage, const SearchSpace& space);
ValidationVerdict validate_architecture(const ArchitectureConfig& arch, const SearchSpace& space);

// |K|.|S|.|se|.|conv|.|SC|.|E|.|A|.|L|.|C_out|; se_ratio is not a factor.
std::uint64_t count_stage_configs(const SearchSpace& space);

nlohmann::ordered_json stage_to_json(const StageConfig& stage);
nlohmann::ordered_json architecture_to_json(const ArchitectureConfig& arch,
                                            bool include_identity = false);
// Compact, fixed field order, lowercase enums, identity fields excluded.
std::string canonical_serialization(const ArchitectureConfig& arch);
// SHA-256 of canonical_serialization, 64 lowercase hex chars.
std::string canonical_hash(const ArchitectureConfig& arch);

ArchitectureConfig parse_architecture(std::string_view text, const SearchSpace& space);
ArchitectureConfig parse_architecture(const nlohmann::json& doc, const SearchSpace& space);
inline ArchitectureConfig parse_architecture(const std::string& text, const SearchSpace& space) {
    return parse_architecture(std::string_view(text), space);
}
inline ArchitectureConfig parse_architecture(const char* text, const SearchSpace& space) {
    return parse_architecture(std::string_view(text), space);
}

nlohmann::ordered_json search_space_to_json(const SearchSpace& space);
std::string search_space_document(const SearchSpace& space);
SearchSpace search_space_from_json(const nlohmann::json& doc);

}  // namespace llmnas
