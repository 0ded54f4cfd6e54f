#include "llmnas/ledger.hpp"

#include "llmnas/digest.hpp"

namespace llmnas {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::pair<EventType, std::string_view> kEventNames[] = {
    {EventType::PromptSent, "prompt_sent"},
    {EventType::CompletionReceived, "completion_received"},
    {EventType::CompletionFailed, "completion_failed"},
    {EventType::CandidateParsed, "candidate_parsed"},
    {EventType::GateVerdict, "gate_verdict"},
    {EventType::EvaluationResult, "evaluation_result"},
    {EventType::FrontSnapshot, "front_snapshot"},
    {EventType::ExplanationRecorded, "explanation_recorded"},
};

}  // namespace

std::string_view to_string(EventType type) {
    for (const auto& [t, name] : kEventNames)
        if (t == type) return name;
    return "?";
}

std::optional<EventType> event_type_from_string(std::string_view name) {
    for (const auto& [t, n] : kEventNames)
        if (n == name) return t;
    return std::nullopt;
}

ordered_json event_to_json(const LedgerEvent& e, bool with_timing) {
    ordered_json j;
    j["seq"] = e.seq;
    j["iteration"] = e.iteration;
    j["type"] = to_string(e.type);
    j["data"] = e.data;
    if (with_timing) j["timing"] = e.timing;
    return j;
}

RunLedger::RunLedger(std::filesystem::path dir, const ordered_json& manifest) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw LedgerIoError("cannot create " + dir_.string() + ": " + ec.message());
    {
        std::ofstream m(dir_ / kManifestFile, std::ios::trunc);
        if (!m) throw LedgerIoError("cannot write manifest in " + dir_.string());
        m << manifest.dump(2) << '\n';
    }
    out_.open(dir_ / kEventsFile, std::ios::trunc);
    if (!out_) throw LedgerIoError("cannot open events file in " + dir_.string());
}

const LedgerEvent& RunLedger::append(int iteration, EventType type, ordered_json data,
                                     ordered_json timing) {
    LedgerEvent e;
    e.seq = events_.size() + 1;
    e.iteration = iteration;
    e.type = type;
    e.data = std::move(data);
    e.timing = std::move(timing);
    out_ << event_to_json(e).dump() << '\n';
    out_.flush();
    if (!out_) throw LedgerIoError("write failed in " + dir_.string());
    events_.push_back(std::move(e));
    return events_.back();
}

std::string RunLedger::digest() const { return ledger_digest(events_); }

std::vector<LedgerEvent> read_events(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw CorruptLedger("no ledger directory " + dir.string());
    std::vector<LedgerEvent> events;
    std::ifstream in(dir / kEventsFile);
    if (!in) return events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = kEventsFile + std::string(":") + std::to_string(lineno);
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw CorruptLedger(where + ": not a JSON object");
        try {
            LedgerEvent e;
            e.seq = j.at("seq").get<std::uint64_t>();
            e.iteration = j.at("iteration").get<int>();
            auto type = event_type_from_string(j.at("type").get<std::string>());
            if (!type) throw CorruptLedger(where + ": unknown event type");
            e.type = *type;
            e.data = j.at("data");
            if (j.contains("timing")) e.timing = j["timing"];
            if (!events.empty() && e.seq <= events.back().seq)
                throw CorruptLedger(where + ": sequence not increasing");
            events.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw CorruptLedger(where + ": " + ex.what());
        }
    }
    return events;
}

json read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifestFile);
    if (!in) throw CorruptLedger("missing " + std::string(kManifestFile) + " in " + dir.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw CorruptLedger("unparsable manifest in " + dir.string());
    return j;
}

std::string ledger_digest(std::span<const LedgerEvent> events) {
    std::string canon;
    for (const auto& e : events) {
        canon += event_to_json(e, false).dump();
        canon += '\n';
    }
    return sha256_hex(canon);
}

}  // namespace llmnas
