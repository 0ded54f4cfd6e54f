#include <cstdio>
#include <sstream>

#include "llmnas/llm.hpp"

namespace llmnas {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "?";
}

nlohmann::ordered_json transcript_to_json(const ChatTranscript& t) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : t.messages) {
        nlohmann::ordered_json j;
        j["role"] = to_string(m.role);
        j["content"] = m.content;
        arr.push_back(std::move(j));
    }
    return arr;
}

void check_decoding(const DecodingParams& d) {
    if (!(d.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    if (!(d.min_p >= 0.0 && d.min_p <= 1.0)) throw std::invalid_argument("min_p must be in [0, 1]");
    if (d.max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
}

namespace {

std::string fixed(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string task_name(int num_classes) {
    if (num_classes == 100) return "CIFAR-100";
    if (num_classes == 10) return "CIFAR-10";
    return std::to_string(num_classes) + "-class";
}

}  // namespace

std::string format_macs(std::uint64_t macs) { return fixed(static_cast<double>(macs) / 1e6) + "M"; }
std::string format_kb(std::uint64_t bytes) {
    return fixed(static_cast<double>(bytes) / 1024.0) + " KB";
}
std::string format_params(std::uint64_t params) {
    return fixed(static_cast<double>(params) / 1e6) + "M";
}

ChatTranscript build_generation_prompt(const SearchSpace& space, const ConstraintSet& limits) {
    ChatTranscript t;
    t.messages.push_back(
        {Role::System,
         "You are a neural architecture design algorithm that exclusively outputs "
         "configurations in JSON format."});

    const std::string res = std::to_string(space.input_resolution);
    std::ostringstream u;
    u << "Task: Generate a lightweight neural network architecture tailored for "
      << task_name(space.num_classes) << " image classification.\n"
      << "Objective: Achieve at least 70% accuracy while minimizing computational cost and "
         "memory usage.\n"
      << "Constraints:\n"
      << "- Minimize RAM usage by reducing intermediate activation size.\n"
      << "- Prioritize stride=2 in early blocks for downsampling.\n"
      << "- Use smaller expansion_factor and output_channels in early blocks.\n"
      << "- Limit SE blocks and their ratios to reduce activation memory.\n"
      << "- Ensure total MACs ≤ " << fixed(limits.macs_max / 1e6, 0) << "M.\n"
      << "- Image size: " << res << "×" << res << ".\n"
      << "Search Space: Use only values from the hierarchical search space: "
      << search_space_document(space) << "\n"
      << "Output format: a single JSON object {\"stages\": [...]} with exactly "
      << space.stage_count
      << " stage objects, each with the keys out_channels, kernel, stride, expansion, se, "
         "se_ratio, conv_block, skip, activation, layers.";
    t.messages.push_back({Role::User, u.str()});
    return t;
}

ChatTranscript with_feedback(ChatTranscript base, std::string feedback) {
    base.messages.push_back({Role::User, std::move(feedback)});
    return base;
}

namespace {

struct RejectionWriter {
    std::string operator()(const GateVerdict& verdict) const {
        std::ostringstream os;
        os << "The proposed architecture was rejected by the resource checks.\n";
        for (const auto& v : verdict.violations) {
            switch (v.kind) {
            case GateViolation::Kind::MacsLow:
                os << "- MACs: current value " << format_macs(v.current)
                   << " is below the desired range [" << format_macs(v.lower) << ", "
                   << format_macs(v.upper) << "]. Increase width, depth or resolution kept "
                   << "in later stages.\n";
                break;
            case GateViolation::Kind::MacsHigh:
                os << "- MACs: current value " << format_macs(v.current)
                   << " is above the desired range [" << format_macs(v.lower) << ", "
                   << format_macs(v.upper) << "]. Reduce channels, expansion or layers.\n";
                break;
            case GateViolation::Kind::Sram:
                os << "- Peak SRAM (int8): current value " << format_kb(v.current)
                   << " exceeds the limit of " << format_kb(v.upper)
                   << ". Downsample earlier or use fewer channels in early stages.\n";
                break;
            }
        }
        os << "Propose a corrected architecture using only values from the same search space.";
        return os.str();
    }

    std::string operator()(const DuplicateCandidate& dup) const {
        return "This architecture (hash " + dup.arch_hash.substr(0, 12) +
               ") was already explored in a previous iteration. Propose a novel architecture "
               "that differs from all previous proposals, using only values from the same "
               "search space.";
    }

    std::string operator()(const InvalidProposal& bad) const {
        return "The previous response could not be used: " + bad.reason +
               ". Respond with a single JSON object that uses only values from the search "
               "space.";
    }
};

}  // namespace

std::string build_rejection_feedback(const Rejection& rejection) {
    if (const auto* g = std::get_if<GateVerdict>(&rejection); g && g->accepted())
        throw std::invalid_argument("rejection feedback requires a rejecting verdict");
    return std::visit(RejectionWriter{}, rejection);
}

std::string build_pareto_feedback(const FrontStatistics& stats, const CandidateRecord& best,
                                  const ConstraintSet& limits) {
    std::ostringstream os;
    os << "Pareto front update: " << stats.count
       << " non-dominated candidates (format [Min, Max] Avg).\n"
       << "- Accuracy (%): " << format_summary(stats.accuracy) << "\n"
       << "- MACs (M): " << format_summary(stats.macs, 1e6) << "\n"
       << "- Parameters (M): " << format_summary(stats.params, 1e6) << "\n"
       << "Best accuracy so far: " << best.candidate_id << " with " << fixed(best.accuracy)
       << "% at " << format_macs(best.macs) << " MACs and " << format_params(best.params)
       << " parameters.\n";
    if (stats.macs.mean > 0.75 * static_cast<double>(limits.macs_max)) {
        os << "Suggestion: the front is expensive on average; reduce MACs and parameters "
              "(fewer channels, smaller expansion, fewer layers) while keeping accuracy.\n";
    } else {
        os << "Suggestion: focus on improving accuracy while maintaining resource efficiency "
              "at a similar cost.\n";
    }
    os << "Propose the next architecture as a single JSON object using only values from the "
          "search space.";
    return os.str();
}

ChatTranscript build_explanation_prompt(const ArchitectureConfig& arch) {
    if (arch.stages.empty())
        throw std::invalid_argument("explanation needs an architecture with stages");
    ChatTranscript t;
    t.messages.push_back({Role::System,
                          "You are a neural architecture design algorithm that proposed the "
                          "following configuration."});
    std::ostringstream u;
    u << kExplanationRequest << "\nArchitecture: " << canonical_serialization(arch)
      << "\nCover each of the following:\n";
    for (const char* topic : kExplanationTopics) u << "- " << topic << "\n";
    t.messages.push_back({Role::User, u.str()});
    return t;
}

}  // namespace llmnas
