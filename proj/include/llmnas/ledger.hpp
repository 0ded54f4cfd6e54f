#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace llmnas {

enum class EventType {
    PromptSent,
    CompletionReceived,
    CompletionFailed,
    CandidateParsed,
    GateVerdict,
    EvaluationResult,
    FrontSnapshot,
    ExplanationRecorded,
};

std::string_view to_string(EventType type);
std::optional<EventType> event_type_from_string(std::string_view name);

// `timing` holds wall-clock data (timestamps, durations) and is the only part
// excluded from the ledger digest.
struct LedgerEvent {
    std::uint64_t seq = 0;
    int iteration = 0;
    EventType type = EventType::PromptSent;
    nlohmann::ordered_json data;
    nlohmann::ordered_json timing;
};

class CorruptLedger : public std::runtime_error {
public:
    explicit CorruptLedger(const std::string& what) : std::runtime_error("corrupt-ledger: " + what) {}
};

class LedgerIoError : public std::runtime_error {
public:
    explicit LedgerIoError(const std::string& what) : std::runtime_error("ledger-io: " + what) {}
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kEventsFile = "events.jsonl";

// Append-only run history: manifest.json plus one JSON event per line in
// events.jsonl, flushed after every append.
class RunLedger {
public:
    // Creates `dir` if needed and starts a fresh events file.
    RunLedger(std::filesystem::path dir, const nlohmann::ordered_json& manifest);

    const LedgerEvent& append(int iteration, EventType type, nlohmann::ordered_json data,
                              nlohmann::ordered_json timing = nlohmann::ordered_json::object());

    const std::vector<LedgerEvent>& events() const { return events_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::string digest() const;

private:
    std::filesystem::path dir_;
    std::ofstream out_;
    std::vector<LedgerEvent> events_;
};

nlohmann::ordered_json event_to_json(const LedgerEvent& e, bool with_timing = true);

// Reads events.jsonl; a missing file is an empty ledger, a missing directory
// or an unparsable line is CorruptLedger.
std::vector<LedgerEvent> read_events(const std::filesystem::path& dir);
nlohmann::json read_manifest(const std::filesystem::path& dir);

// SHA-256 over the timing-free serialization of every event, one per line.
std::string ledger_digest(std::span<const LedgerEvent> events);

}  // namespace llmnas
