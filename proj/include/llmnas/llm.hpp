#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmnas/arch_space.hpp"
#include "llmnas/pareto.hpp"
#include "llmnas/resource_estimator.hpp"

namespace llmnas {

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct ChatMessage {
    Role role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

// First message is always the system framing.
struct ChatTranscript {
    std::vector<ChatMessage> messages;
    bool operator==(const ChatTranscript&) const = default;
};

nlohmann::ordered_json transcript_to_json(const ChatTranscript& t);

struct DecodingParams {
    double temperature = 1.5;
    double min_p = 0.1;
    int max_tokens = 2048;
    std::string model_name = "meta-llama/Llama-3.1-8B-Instruct";
    // Some endpoints reject unknown sampling fields.
    bool send_min_p = true;
};

void check_decoding(const DecodingParams& d);

struct DuplicateCandidate {
    std::string arch_hash;
};
struct InvalidProposal {
    std::string reason;
};
using Rejection = std::variant<GateVerdict, DuplicateCandidate, InvalidProposal>;

// "400.00M" and "320.00 KB" (1 KB = 1024 bytes).
std::string format_macs(std::uint64_t macs);
std::string format_kb(std::uint64_t bytes);
std::string format_params(std::uint64_t params);

ChatTranscript build_generation_prompt(const SearchSpace& space, const ConstraintSet& limits);

// Generation prompt followed by a single feedback message (no history).
ChatTranscript with_feedback(ChatTranscript base, std::string feedback);

std::string build_rejection_feedback(const Rejection& rejection);

std::string build_pareto_feedback(const FrontStatistics& stats, const CandidateRecord& best,
                                  const ConstraintSet& limits);

inline constexpr const char* kExplanationRequest =
    "Explain why this design was chosen for the current iteration. Highlight the reasoning "
    "behind these choices.";
inline constexpr const char* kExplanationTopics[] = {
    "Kernel sizes", "Expansion factors", "Stride", "SE ratio", "Activation functions",
    "Skip operations"};

// Throws std::invalid_argument for an architecture without stages.
ChatTranscript build_explanation_prompt(const ArchitectureConfig& arch);

struct CandidateProposal {
    std::string raw_text;
    std::optional<ArchitectureConfig> extracted;
    std::optional<std::string> extraction_error;
};

// Text of the first balanced {...} object in `raw`, string-literal aware.
std::optional<std::string_view> first_json_object(std::string_view raw);

CandidateProposal extract_candidate(std::string_view raw, const SearchSpace& space);

}  // namespace llmnas
