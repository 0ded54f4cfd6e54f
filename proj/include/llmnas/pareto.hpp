#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace llmnas {

enum class Phase { Mini, Full, Kd };
enum class RecordStatus { Evaluated, RejectedGate, Duplicate };

std::string_view to_string(Phase phase);
std::string_view to_string(RecordStatus status);
std::optional<Phase> phase_from_string(std::string_view name);

// Objectives: accuracy (maximize), MACs and params (minimize). Accuracy is a
// percentage stored at two decimals and compared exactly.
struct CandidateRecord {
    std::string candidate_id;
    std::string arch_hash;
    double accuracy = 0.0;
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
    std::uint64_t peak_sram_bytes = 0;
    Phase phase = Phase::Mini;
    int iteration = 0;
    RecordStatus status = RecordStatus::Evaluated;

    bool operator==(const CandidateRecord&) const = default;
};

// Rounds a percentage to the two-decimal value stored in records.
double round_accuracy(double percent);

bool dominates(const CandidateRecord& a, const CandidateRecord& b);

struct FrontDelta {
    bool added = false;
    bool best_updated = false;
    std::vector<CandidateRecord> removed;
};

class ParetoFront {
public:
    const std::vector<CandidateRecord>& members() const { return members_; }
    const std::optional<CandidateRecord>& best_accuracy() const { return best_; }
    bool empty() const { return members_.empty(); }

    // Inserts `rec` unless a member dominates it (or it repeats a member's
    // metrics and hash), evicting every member it dominates. The best-accuracy
    // tracker sees every offered record. Requires status == Evaluated.
    FrontDelta update(const CandidateRecord& rec);

    // Best-accuracy tracking for an evaluated record that is kept out of the
    // member set.
    bool observe_best(const CandidateRecord& rec);

    bool operator==(const ParetoFront&) const = default;

private:
    std::vector<CandidateRecord> members_;
    std::optional<CandidateRecord> best_;
};

std::pair<ParetoFront, FrontDelta> update_front(const ParetoFront& front,
                                                const CandidateRecord& rec);

struct MetricSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

struct FrontStatistics {
    std::size_t count = 0;
    MetricSummary accuracy;
    MetricSummary macs;
    MetricSummary params;
};

class EmptyFront : public std::runtime_error {
public:
    EmptyFront() : std::runtime_error("empty-front: statistics need at least one member") {}
};

FrontStatistics statistics(const ParetoFront& front);

// "[min, max] mean" with every value divided by `scale`, fixed decimals.
std::string format_summary(const MetricSummary& m, double scale = 1.0, int decimals = 2);

nlohmann::ordered_json record_to_json(const CandidateRecord& rec);
CandidateRecord record_from_json(const nlohmann::json& doc);
nlohmann::ordered_json statistics_to_json(const FrontStatistics& stats);
// Snapshot document: members, best_accuracy, statistics (null when empty).
nlohmann::ordered_json front_to_json(const ParetoFront& front);

}  // namespace llmnas
