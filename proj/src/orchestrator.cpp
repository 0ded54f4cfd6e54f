#include "llmnas/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <future>
#include <sstream>
#include <unordered_set>

namespace llmnas {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename Fn>
void for_known_keys(const json& obj, const char* section,
                    std::initializer_list<const char*> known, Fn&& apply) {
    if (!obj.is_object()) throw std::invalid_argument(std::string(section) + ": expected object");
    for (const auto& [key, val] : obj.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) ==
            known.end())
            throw std::invalid_argument(std::string(section) + ": unknown key " + key);
        apply(key, val);
    }
}

}  // namespace

RunConfig run_config_from_json(const json& doc) {
    RunConfig cfg;
    try {
        for_known_keys(doc, "config",
                       {"search_space", "constraints", "iterations", "decoding", "llm",
                        "evaluator", "seed", "ledger_dir"},
                       [&](const std::string& key, const json& val) {
            if (key == "search_space") cfg.space = search_space_from_json(val);
            else if (key == "constraints") cfg.limits = constraints_from_json(val);
            else if (key == "iterations") cfg.iterations = val.get<int>();
            else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
            else if (key == "ledger_dir") cfg.ledger_dir = val.get<std::string>();
            else if (key == "decoding") {
                for_known_keys(val, "decoding",
                               {"temperature", "min_p", "max_tokens", "model", "send_min_p"},
                               [&](const std::string& k, const json& v) {
                    if (k == "temperature") cfg.decoding.temperature = v.get<double>();
                    else if (k == "min_p") cfg.decoding.min_p = v.get<double>();
                    else if (k == "max_tokens") cfg.decoding.max_tokens = v.get<int>();
                    else if (k == "model") cfg.decoding.model_name = v.get<std::string>();
                    else cfg.decoding.send_min_p = v.get<bool>();
                });
            } else if (key == "llm") {
                for_known_keys(val, "llm",
                               {"transport", "endpoint", "script_path", "api_key_env",
                                "timeout_seconds", "retries", "backoff_ms"},
                               [&](const std::string& k, const json& v) {
                    if (k == "transport") cfg.llm.transport = v.get<std::string>();
                    else if (k == "endpoint") cfg.llm.endpoint = v.get<std::string>();
                    else if (k == "script_path") cfg.llm.script_path = v.get<std::string>();
                    else if (k == "api_key_env") cfg.llm.api_key_env = v.get<std::string>();
                    else if (k == "timeout_seconds") cfg.llm.timeout_seconds = v.get<int>();
                    else if (k == "retries") cfg.llm.retry.retries = v.get<int>();
                    else cfg.llm.retry.backoff = std::chrono::milliseconds(v.get<long long>());
                });
            } else if (key == "evaluator") {
                for_known_keys(val, "evaluator", {"kind", "command", "timeout_seconds", "parallel"},
                               [&](const std::string& k, const json& v) {
                    if (k == "kind") cfg.evaluator.kind = v.get<std::string>();
                    else if (k == "command") {
                        if (v.is_string()) cfg.evaluator.command = {v.get<std::string>()};
                        else cfg.evaluator.command = v.get<std::vector<std::string>>();
                    } else if (k == "timeout_seconds") cfg.evaluator.timeout_seconds = v.get<double>();
                    else cfg.evaluator.parallel = v.get<int>();
                });
            }
        });
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    check_run_config(cfg);
    return cfg;
}

ordered_json run_config_to_json(const RunConfig& cfg) {
    ordered_json j;
    j["search_space"] = search_space_to_json(cfg.space);
    j["constraints"] = constraints_to_json(cfg.limits);
    j["iterations"] = cfg.iterations;
    j["decoding"] = {{"temperature", cfg.decoding.temperature},
                     {"min_p", cfg.decoding.min_p},
                     {"max_tokens", cfg.decoding.max_tokens},
                     {"model", cfg.decoding.model_name},
                     {"send_min_p", cfg.decoding.send_min_p}};
    j["llm"] = {{"transport", cfg.llm.transport},
                {"endpoint", cfg.llm.endpoint},
                {"script_path", cfg.llm.script_path},
                {"api_key_env", cfg.llm.api_key_env},
                {"timeout_seconds", cfg.llm.timeout_seconds},
                {"retries", cfg.llm.retry.retries},
                {"backoff_ms", cfg.llm.retry.backoff.count()}};
    j["evaluator"] = {{"kind", cfg.evaluator.kind},
                      {"command", cfg.evaluator.command},
                      {"timeout_seconds", cfg.evaluator.timeout_seconds},
                      {"parallel", cfg.evaluator.parallel}};
    j["seed"] = cfg.seed;
    j["ledger_dir"] = cfg.ledger_dir.string();
    return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw std::invalid_argument("config is not valid JSON: " + path.string());
    return run_config_from_json(doc);
}

void check_run_config(const RunConfig& cfg) {
    check_search_space(cfg.space);
    if (cfg.limits.macs_min > cfg.limits.macs_max)
        throw std::invalid_argument("constraints: macs_min exceeds macs_max");
    if (cfg.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (cfg.evaluator.parallel < 1) throw std::invalid_argument("evaluator.parallel must be >= 1");
    if (cfg.llm.retry.retries < 0) throw std::invalid_argument("llm.retries must be >= 0");
    check_decoding(cfg.decoding);
}

std::string candidate_id_for(int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%04d", iteration);
    return buf;
}

// ---------------------------------------------------------------------------
// Search loop

namespace {

ordered_json stamp() { return ordered_json{{"ts", utc_timestamp()}}; }

struct InFlight {
    int iteration;
    std::string candidate_id;
    std::string arch_hash;
    ResourceEstimate estimate;
    std::future<EvaluationResult> result;
};

class SearchLoop {
public:
    SearchLoop(const RunConfig& cfg, const SearchHooks& hooks, Transport& transport,
               Evaluator& evaluator)
        : cfg_(cfg),
          hooks_(hooks),
          transport_(transport),
          evaluator_(evaluator),
          ledger_(cfg.ledger_dir, manifest(cfg)),
          base_prompt_(build_generation_prompt(cfg.space, cfg.limits)) {}

    SearchSummary run() {
        for (int it = 1; it <= cfg_.iterations; ++it) {
            if (hooks_.stop && hooks_.stop->load()) {
                summary_.interrupted = true;
                break;
            }
            iterate(it);
            summary_.iterations_run = it;
            if (hooks_.on_iteration) hooks_.on_iteration(it, front_, ledger_.events().size());
        }
        while (!in_flight_.empty()) finish_oldest();
        if (hooks_.on_iteration && summary_.iterations_run > 0)
            hooks_.on_iteration(summary_.iterations_run, front_, ledger_.events().size());
        summary_.front = front_;
        summary_.ledger_digest = ledger_.digest();
        return summary_;
    }

private:
    static ordered_json manifest(const RunConfig& cfg) {
        ordered_json m;
        m["format"] = "llmnas-ledger/1";
        m["seed"] = cfg.seed;
        m["config"] = run_config_to_json(cfg);
        m["started"] = utc_timestamp();
        return m;
    }

    void set_feedback(const char* kind, std::string text) {
        feedback_kind_ = kind;
        feedback_ = std::move(text);
    }

    void iterate(int it) {
        const ChatTranscript prompt =
            feedback_ ? with_feedback(base_prompt_, *feedback_) : base_prompt_;
        ledger_.append(it, EventType::PromptSent,
                       {{"kind", feedback_ ? feedback_kind_ : "generation"},
                        {"messages", transcript_to_json(prompt)}},
                       stamp());

        std::string text;
        try {
            text = request_completion(transport_, prompt, cfg_.decoding, cfg_.llm.retry);
        } catch (const LlmError& e) {
            ++summary_.completion_failures;
            ledger_.append(it, EventType::CompletionFailed, {{"error", e.what()}}, stamp());
            return;
        }
        ledger_.append(it, EventType::CompletionReceived, {{"text", text}}, stamp());

        CandidateProposal proposal = extract_candidate(text, cfg_.space);
        const std::string id = candidate_id_for(it);
        if (!proposal.extracted) {
            ++summary_.invalid_proposals;
            ledger_.append(it, EventType::CandidateParsed,
                           {{"candidate_id", id}, {"ok", false}, {"error", *proposal.extraction_error}},
                           stamp());
            set_feedback("rejection_feedback",
                         build_rejection_feedback(InvalidProposal{*proposal.extraction_error}));
            return;
        }
        ArchitectureConfig arch = std::move(*proposal.extracted);
        arch.candidate_id = id;
        const std::string hash = canonical_hash(arch);
        ledger_.append(it, EventType::CandidateParsed,
                       {{"candidate_id", id},
                        {"ok", true},
                        {"arch_hash", hash},
                        {"arch", architecture_to_json(arch)}},
                       stamp());

        if (!seen_.insert(hash).second) {
            ++summary_.duplicates;
            ledger_.append(it, EventType::GateVerdict,
                           {{"candidate_id", id}, {"arch_hash", hash}, {"verdict", "duplicate"}},
                           stamp());
            set_feedback("rejection_feedback", build_rejection_feedback(DuplicateCandidate{hash}));
            return;
        }

        ResourceEstimate est;
        try {
            est = estimate(arch, cfg_.space);
        } catch (const std::exception& e) {
            ++summary_.invalid_proposals;
            ledger_.append(it, EventType::GateVerdict,
                           {{"candidate_id", id}, {"arch_hash", hash}, {"verdict", "invalid"},
                            {"error", e.what()}},
                           stamp());
            set_feedback("rejection_feedback", build_rejection_feedback(InvalidProposal{e.what()}));
            return;
        }
        const GateVerdict verdict = check_constraints(est, cfg_.limits);
        ledger_.append(it, EventType::GateVerdict,
                       {{"candidate_id", id},
                        {"arch_hash", hash},
                        {"verdict", verdict.accepted() ? "accept" : "reject"},
                        {"total_macs", est.total_macs},
                        {"total_params", est.total_params},
                        {"peak_sram_bytes", est.peak_sram_bytes},
                        {"gate", verdict_to_json(verdict)}},
                       stamp());
        if (!verdict.accepted()) {
            ++summary_.gate_rejections;
            set_feedback("rejection_feedback", build_rejection_feedback(verdict));
            return;
        }

        EvaluationRequest req;
        req.candidate_id = id;
        req.arch = arch;
        req.phase = Phase::Mini;
        req.seed = cfg_.seed;
        req.hparams = phase_defaults(Phase::Mini);
        Evaluator& ev = evaluator_;
        in_flight_.push_back({it, id, hash, est,
                              std::async(std::launch::async, [&ev, req] { return ev.evaluate(req); })});
        // Results are consumed strictly oldest-first and only when the window
        // is full, so the event order does not depend on completion timing.
        while (static_cast<int>(in_flight_.size()) >= cfg_.evaluator.parallel) finish_oldest();
    }

    void finish_oldest() {
        InFlight job = std::move(in_flight_.front());
        in_flight_.pop_front();
        const EvaluationResult res = job.result.get();

        ordered_json data;
        data["candidate_id"] = job.candidate_id;
        data["arch_hash"] = job.arch_hash;
        data["phase"] = to_string(Phase::Mini);
        data["status"] = res.ok() ? "ok" : "failed";
        ordered_json timing = stamp();
        timing["wall_seconds"] = res.wall_seconds;
        if (!res.ok()) {
            ++summary_.evaluation_failures;
            data["reason"] = res.failure_reason.value_or("unknown");
            ledger_.append(job.iteration, EventType::EvaluationResult, std::move(data),
                           std::move(timing));
            return;
        }

        CandidateRecord rec;
        rec.candidate_id = job.candidate_id;
        rec.arch_hash = job.arch_hash;
        rec.accuracy = round_accuracy(*res.test_accuracy);
        rec.macs = job.estimate.total_macs;
        rec.params = job.estimate.total_params;
        rec.peak_sram_bytes = job.estimate.peak_sram_bytes;
        rec.phase = Phase::Mini;
        rec.iteration = job.iteration;
        rec.status = RecordStatus::Evaluated;
        data["test_accuracy"] = *res.test_accuracy;
        data["record"] = record_to_json(rec);
        ledger_.append(job.iteration, EventType::EvaluationResult, std::move(data),
                       std::move(timing));
        ++summary_.evaluated;

        const FrontDelta delta = front_.update(rec);
        auto removed = ordered_json::array();
        for (const auto& r : delta.removed) removed.push_back(r.candidate_id);
        ledger_.append(job.iteration, EventType::FrontSnapshot,
                       {{"candidate_id", rec.candidate_id},
                        {"added", delta.added},
                        {"removed", removed},
                        {"best_updated", delta.best_updated},
                        {"front", front_to_json(front_)}},
                       stamp());
        set_feedback("pareto_feedback",
                     build_pareto_feedback(statistics(front_), *front_.best_accuracy(), cfg_.limits));
    }

    const RunConfig& cfg_;
    const SearchHooks& hooks_;
    Transport& transport_;
    Evaluator& evaluator_;
    RunLedger ledger_;
    ChatTranscript base_prompt_;
    ParetoFront front_;
    std::unordered_set<std::string> seen_;
    std::deque<InFlight> in_flight_;
    std::optional<std::string> feedback_;
    const char* feedback_kind_ = "generation";
    SearchSummary summary_;
};

}  // namespace

SearchSummary search(const RunConfig& cfg, const SearchHooks& hooks) {
    check_run_config(cfg);
    std::unique_ptr<Transport> own_transport;
    std::unique_ptr<Evaluator> own_evaluator;
    Transport* transport = hooks.transport;
    Evaluator* evaluator = hooks.evaluator;
    if (!evaluator) {
        own_evaluator = make_evaluator(cfg.evaluator, cfg.space);
        evaluator = own_evaluator.get();
    }
    if (!transport) {
        own_transport = make_transport(cfg.llm);
        transport = own_transport.get();
    }
    SearchLoop loop(cfg, hooks, *transport, *evaluator);
    return loop.run();
}

EvaluationResult dispatch_evaluation(const EvaluationRequest& req, const RunConfig& cfg) {
    auto evaluator = make_evaluator(cfg.evaluator, cfg.space);
    return evaluator->evaluate(req);
}

// ---------------------------------------------------------------------------
// Replay and selection

ParetoFront replay_events(std::span<const LedgerEvent> events) {
    ParetoFront front;
    for (const auto& e : events) {
        if (e.type != EventType::EvaluationResult) continue;
        try {
            if (e.data.at("status").get<std::string>() != "ok") continue;
            front.update(record_from_json(e.data.at("record")));
        } catch (const json::exception& ex) {
            throw CorruptLedger("event " + std::to_string(e.seq) + ": " + ex.what());
        } catch (const std::invalid_argument& ex) {
            throw CorruptLedger("event " + std::to_string(e.seq) + ": " + ex.what());
        }
    }
    return front;
}

ParetoFront replay(const std::filesystem::path& ledger_dir) {
    const auto events = read_events(ledger_dir);
    return replay_events(events);
}

std::size_t verify_ledger(const std::filesystem::path& ledger_dir) {
    const auto events = read_events(ledger_dir);
    ParetoFront front;
    std::size_t checked = 0;
    for (const auto& e : events) {
        if (e.type == EventType::EvaluationResult) {
            if (e.data.value("status", "") == "ok") {
                try {
                    front.update(record_from_json(e.data.at("record")));
                } catch (const std::exception& ex) {
                    throw CorruptLedger("event " + std::to_string(e.seq) + ": " + ex.what());
                }
            }
        } else if (e.type == EventType::FrontSnapshot) {
            if (!e.data.contains("front") ||
                front_to_json(front).dump() != e.data["front"].dump())
                throw CorruptLedger("front_snapshot " + std::to_string(e.seq) +
                                    " differs from replayed front");
            ++checked;
        }
    }
    return checked;
}

CandidateRecord select_final(const ParetoFront& front, SelectionPolicy policy,
                             double accuracy_floor) {
    const auto cheaper = [](const CandidateRecord& a, const CandidateRecord& b) {
        if (a.macs != b.macs) return a.macs < b.macs;
        if (a.params != b.params) return a.params < b.params;
        return a.candidate_id < b.candidate_id;
    };
    const CandidateRecord* pick = nullptr;
    for (const auto& m : front.members()) {
        if (m.status != RecordStatus::Evaluated) continue;
        if (policy == SelectionPolicy::BestAccuracyInBudget) {
            if (!pick || m.accuracy > pick->accuracy ||
                (m.accuracy == pick->accuracy && cheaper(m, *pick)))
                pick = &m;
        } else if (m.accuracy >= accuracy_floor && (!pick || cheaper(m, *pick))) {
            pick = &m;
        }
    }
    if (!pick) throw NoCandidate();
    return *pick;
}

namespace {

std::string with_thousands(std::uint64_t v) {
    std::string digits = std::to_string(v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

}  // namespace

std::string search_space_header(const SearchSpace& space) {
    const std::string per_stage = with_thousands(count_stage_configs(space));
    return "Search space: " + per_stage + " configurations per stage, " + per_stage + "^" +
           std::to_string(space.stage_count) + " architectures over " +
           std::to_string(space.stage_count) + " stages";
}

std::string format_front_report(const ParetoFront& front, const SearchSpace& space) {
    std::ostringstream os;
    os << search_space_header(space) << "\n";
    if (front.empty()) {
        os << "Pareto front: empty\n";
        return os.str();
    }
    const FrontStatistics st = statistics(front);
    os << "Pareto front: " << st.count << " candidates, format [Min, Max] Avg\n"
       << "  Accuracy (%):    " << format_summary(st.accuracy) << "\n"
       << "  MACs (M):        " << format_summary(st.macs, 1e6) << "\n"
       << "  Parameters (M):  " << format_summary(st.params, 1e6) << "\n";
    os << "  id        accuracy      MACs(M)   params(M)  SRAM(KB)  iteration\n";
    auto members = front.members();
    std::sort(members.begin(), members.end(),
              [](const CandidateRecord& a, const CandidateRecord& b) { return a.macs < b.macs; });
    for (const auto& m : members) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-8s %9.2f %12.2f %11.3f %9.1f %10d\n",
                      m.candidate_id.c_str(), m.accuracy, m.macs / 1e6, m.params / 1e6,
                      m.peak_sram_bytes / 1024.0, m.iteration);
        os << line;
    }
    if (const auto& best = front.best_accuracy()) {
        char line[160];
        std::snprintf(line, sizeof line, "Best accuracy: %s %.2f%% at %s MACs\n",
                      best->candidate_id.c_str(), best->accuracy, format_macs(best->macs).c_str());
        os << line;
    }
    return os.str();
}

}  // namespace llmnas
