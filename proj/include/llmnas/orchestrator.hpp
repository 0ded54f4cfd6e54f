#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "llmnas/arch_space.hpp"
#include "llmnas/chat_client.hpp"
#include "llmnas/evaluator.hpp"
#include "llmnas/ledger.hpp"
#include "llmnas/llm.hpp"
#include "llmnas/pareto.hpp"
#include "llmnas/resource_estimator.hpp"

namespace llmnas {

struct RunConfig {
    SearchSpace space;
    ConstraintSet limits;
    int iterations = 500;
    DecodingParams decoding;
    LlmSettings llm;
    EvaluatorSettings evaluator;
    std::uint64_t seed = 0;
    std::filesystem::path ledger_dir = "runs/latest";
};

// Keys: search_space, constraints, iterations, decoding, llm, evaluator,
// seed, ledger_dir. Missing keys keep their defaults; unknown keys throw.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);
void check_run_config(const RunConfig& cfg);

std::string candidate_id_for(int iteration);

struct SearchHooks {
    // Polled before each iteration; set from a signal handler to stop early.
    const std::atomic<bool>* stop = nullptr;
    // Called after every iteration with the live front and the number of
    // ledger events written so far.
    std::function<void(int iteration, const ParetoFront& front, std::size_t events)> on_iteration;
    // Overrides for tests and embedding; built from the config when null.
    Transport* transport = nullptr;
    Evaluator* evaluator = nullptr;
};

struct SearchSummary {
    ParetoFront front;
    std::string ledger_digest;
    int iterations_run = 0;
    int evaluated = 0;
    int evaluation_failures = 0;
    int gate_rejections = 0;
    int duplicates = 0;
    int invalid_proposals = 0;
    int completion_failures = 0;
    bool interrupted = false;
};

// Prompt -> completion -> extract -> dedup -> estimate -> gate -> evaluate ->
// front update -> feedback, for up to cfg.iterations iterations. Every step is
// appended to the ledger in cfg.ledger_dir.
SearchSummary search(const RunConfig& cfg, const SearchHooks& hooks = {});

// One-shot dispatch through the evaluator the config describes.
EvaluationResult dispatch_evaluation(const EvaluationRequest& req, const RunConfig& cfg);

// Front rebuilt from evaluation_result events alone.
ParetoFront replay_events(std::span<const LedgerEvent> events);
ParetoFront replay(const std::filesystem::path& ledger_dir);

// Checks every stored front_snapshot against the replay of the events before
// it. Returns the number of snapshots checked; throws CorruptLedger on the
// first mismatch.
std::size_t verify_ledger(const std::filesystem::path& ledger_dir);

enum class SelectionPolicy { BestAccuracyInBudget, MinMacsAtAccuracyFloor };

class NoCandidate : public std::runtime_error {
public:
    NoCandidate() : std::runtime_error("no-candidate-meets-policy") {}
};

CandidateRecord select_final(const ParetoFront& front, SelectionPolicy policy,
                             double accuracy_floor = 0.0);

// Header line for front reports: per-stage configuration count and the total
// space as an exponent expression, e.g. "17,280^5".
std::string search_space_header(const SearchSpace& space);
std::string format_front_report(const ParetoFront& front, const SearchSpace& space);

}  // namespace llmnas
