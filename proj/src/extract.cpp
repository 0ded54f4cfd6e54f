#include "llmnas/llm.hpp"

namespace llmnas {

std::optional<std::string_view> first_json_object(std::string_view raw) {
    const auto start = raw.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
        const char c = raw[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return raw.substr(start, i - start + 1);
    }
    return std::nullopt;
}

CandidateProposal extract_candidate(std::string_view raw, const SearchSpace& space) {
    CandidateProposal proposal;
    proposal.raw_text = std::string(raw);
    const auto object = first_json_object(raw);
    if (!object) {
        proposal.extraction_error = "no complete JSON object found in the response";
        return proposal;
    }
    try {
        proposal.extracted = parse_architecture(*object, space);
        proposal.extracted->source = CandidateSource::Llm;
    } catch (const ParseError& e) {
        proposal.extraction_error = e.what();
    }
    return proposal;
}

}  // namespace llmnas
