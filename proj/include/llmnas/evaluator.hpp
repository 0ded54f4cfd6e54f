#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmnas/arch_space.hpp"
#include "llmnas/pareto.hpp"
#include "llmnas/resource_estimator.hpp"

namespace llmnas {

struct KdSettings {
    std::string teacher = "google/vit-base-patch16-224-in21k";
    double temperature = 10.0;
    double alpha0 = 0.4;
    double alpha_final = 0.8;
};

struct PhaseHyperparams {
    int epochs = 30;
    int batch_size = 128;
    nlohmann::ordered_json lr_schedule;
    double momentum = 0.9;
    bool nesterov = true;
    double weight_decay = 1e-4;
    bool autoaugment = true;
    double mixup_alpha = 0.0;
    std::optional<KdSettings> kd;
};

// Training recipe per phase: mini (candidate scoring), full, kd.
PhaseHyperparams phase_defaults(Phase phase);
nlohmann::ordered_json hyperparams_to_json(const PhaseHyperparams& hp);

struct EvaluationRequest {
    std::string candidate_id;
    ArchitectureConfig arch;
    Phase phase = Phase::Mini;
    std::uint64_t seed = 0;
    PhaseHyperparams hparams = phase_defaults(Phase::Mini);
};

struct EvaluationResult {
    enum class Status { Ok, Failed };
    std::string candidate_id;
    std::optional<double> test_accuracy;  // present iff status == Ok
    double wall_seconds = 0.0;
    Status status = Status::Failed;
    std::optional<std::string> failure_reason;

    bool ok() const { return status == Status::Ok; }
};

// One protocol request line (no trailing newline).
std::string encode_request(const EvaluationRequest& req);
// Parses one response line for `expected_id`; anything off-protocol becomes a
// failed result whose reason starts with "protocol-violation".
EvaluationResult decode_response(const std::string& line, const std::string& expected_id);

// Deterministic stand-in for mini-phase training:
// clamp(5 ln(macs/1e6) + 2 ln(params/1e3) + u, 1, 90).
double surrogate_accuracy(std::uint64_t macs, std::uint64_t params, double u);
// u = 4 h / 2^64 - 2, h = first 8 bytes (big-endian) of
// SHA-256(candidate_hash || seed as 8 big-endian bytes).
double surrogate_noise(const std::string& candidate_hash, std::uint64_t seed);
EvaluationResult surrogate_evaluate(const ResourceEstimate& est, const std::string& candidate_hash,
                                    std::uint64_t seed);

class EvaluatorUnavailable : public std::runtime_error {
public:
    explicit EvaluatorUnavailable(const std::string& what)
        : std::runtime_error("evaluator-unavailable: " + what) {}
};

class Evaluator {
public:
    virtual ~Evaluator() = default;
    // Thread-safe; failures are reported in the result, never thrown.
    virtual EvaluationResult evaluate(const EvaluationRequest& req) = 0;
};

class SurrogateEvaluator final : public Evaluator {
public:
    explicit SurrogateEvaluator(SearchSpace space) : space_(std::move(space)) {}
    EvaluationResult evaluate(const EvaluationRequest& req) override;

private:
    SearchSpace space_;
};

// Pool of long-lived evaluator processes speaking newline-delimited JSON on
// stdin/stdout, one outstanding request per process. Dead or timed-out
// processes are restarted on the next request.
class SubprocessEvaluator final : public Evaluator {
public:
    SubprocessEvaluator(std::vector<std::string> command, int processes,
                        std::chrono::milliseconds timeout);
    ~SubprocessEvaluator() override;

    SubprocessEvaluator(const SubprocessEvaluator&) = delete;
    SubprocessEvaluator& operator=(const SubprocessEvaluator&) = delete;

    EvaluationResult evaluate(const EvaluationRequest& req) override;

private:
    struct Worker;
    std::vector<std::string> command_;
    std::chrono::milliseconds timeout_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::vector<Worker*> idle_;
    std::mutex mu_;
    std::condition_variable cv_;
};

struct EvaluatorSettings {
    std::string kind = "surrogate";  // "surrogate" | "external"
    std::vector<std::string> command;
    double timeout_seconds = 4 * 3600.0;
    int parallel = 1;
};

std::unique_ptr<Evaluator> make_evaluator(const EvaluatorSettings& settings,
                                          const SearchSpace& space);

}  // namespace llmnas
