#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "llmnas/distill.hpp"
#include "llmnas/orchestrator.hpp"

using namespace llmnas;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Search space and limits come from a run config when one is given.
RunConfig optional_config(const std::string& path) {
    return path.empty() ? RunConfig{} : load_run_config(path);
}

SearchSpace ledger_space(const std::string& dir) {
    const json m = read_manifest(dir);
    if (m.contains("config") && m["config"].contains("search_space"))
        return search_space_from_json(m["config"]["search_space"]);
    return SearchSpace{};
}

ArchitectureConfig load_arch(const std::string& path, const SearchSpace& space) {
    return parse_architecture(slurp(path), space);
}

int report_parse_error(const ParseError& e) {
    json out{{"ok", false}, {"error", to_string(e.kind())}, {"details", e.details()}};
    std::cout << out.dump(2) << "\n";
    return e.kind() == ParseError::Kind::Space ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-guided TinyML architecture search"};
    app.require_subcommand(1);

    // search
    auto* search_cmd = app.add_subcommand("search", "Run the search loop");
    std::string config_path;
    std::string ledger_override;
    std::string mock_script;
    int iterations = 0;
    bool quiet = false;
    search_cmd->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    search_cmd->add_option("--ledger", ledger_override, "Override the ledger directory");
    search_cmd->add_option("--iterations", iterations, "Override the iteration budget");
    search_cmd->add_option("--mock", mock_script, "Use a scripted LLM (JSONL replies)");
    search_cmd->add_flag("-q,--quiet", quiet, "No per-iteration progress");

    // estimate / validate
    auto* estimate_cmd = app.add_subcommand("estimate", "Print the resource estimate and gate verdict");
    std::string arch_path;
    std::string space_config;
    bool layers = false;
    estimate_cmd->add_option("arch", arch_path, "Architecture JSON")->required();
    estimate_cmd->add_option("--config", space_config, "Take search space and limits from a run config");
    estimate_cmd->add_flag("--layers", layers, "Include the per-layer table");

    auto* validate_cmd = app.add_subcommand("validate", "Check an architecture against the search space");
    validate_cmd->add_option("arch", arch_path, "Architecture JSON")->required();
    validate_cmd->add_option("--config", space_config, "Take the search space from a run config");

    // pareto show
    auto* pareto_cmd = app.add_subcommand("pareto", "Inspect a Pareto front");
    pareto_cmd->require_subcommand(1);
    auto* show_cmd = pareto_cmd->add_subcommand("show", "Show the front of a run ledger");
    std::string ledger_dir;
    bool as_json = false;
    show_cmd->add_option("ledger", ledger_dir, "Ledger directory")->required();
    show_cmd->add_flag("--json", as_json, "Print the snapshot document");

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "Rebuild the front from evaluation events");
    replay_cmd->add_option("ledger", ledger_dir, "Ledger directory")->required();
    bool no_verify = false;
    replay_cmd->add_flag("--no-verify", no_verify, "Skip the snapshot comparison");

    // select
    auto* select_cmd = app.add_subcommand("select", "Pick a final candidate from a ledger's front");
    std::string policy_name = "best";
    double threshold = 0.0;
    select_cmd->add_option("--policy", policy_name, "best | floor")
        ->check(CLI::IsMember({"best", "floor", "best_accuracy_in_budget", "min_macs_at_accuracy_floor"}));
    select_cmd->add_option("--threshold", threshold, "Accuracy floor (%) for the floor policy");
    select_cmd->add_option("ledger", ledger_dir, "Ledger directory")->required();

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "Ask the LLM to explain a design");
    std::string endpoint;
    explain_cmd->add_option("arch", arch_path, "Architecture JSON")->required();
    explain_cmd->add_option("--endpoint", endpoint, "OpenAI-compatible base URL");
    explain_cmd->add_option("--mock", mock_script, "Use a scripted LLM (JSONL replies)");
    explain_cmd->add_option("--config", space_config, "Decoding and LLM settings from a run config");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Run one evaluation through the configured evaluator");
    std::string phase_name = "mini";
    evaluate_cmd->add_option("arch", arch_path, "Architecture JSON")->required();
    evaluate_cmd->add_option("--phase", phase_name, "mini | full | kd")
        ->check(CLI::IsMember({"mini", "full", "kd"}));
    evaluate_cmd->add_option("--config", space_config, "Evaluator settings from a run config");

    // kd-vectors
    auto* kd_cmd = app.add_subcommand("kd-vectors", "Write the shared distillation test vectors");
    std::string out_path;
    unsigned kd_seed = 20250101;
    int kd_cases = 24;
    kd_cmd->add_option("--out", out_path, "Output file")->required();
    kd_cmd->add_option("--seed", kd_seed, "Generator seed");
    kd_cmd->add_option("--cases", kd_cases, "Number of cases")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (search_cmd->parsed()) {
            RunConfig cfg = load_run_config(config_path);
            if (!ledger_override.empty()) cfg.ledger_dir = ledger_override;
            if (iterations > 0) cfg.iterations = iterations;
            if (!mock_script.empty()) {
                cfg.llm.transport = "mock";
                cfg.llm.script_path = mock_script;
            }
            std::signal(SIGINT, on_sigint);
            SearchHooks hooks;
            hooks.stop = &g_stop;
            if (!quiet) {
                hooks.on_iteration = [&](int it, const ParetoFront& front, std::size_t events) {
                    std::fprintf(stderr, "[%d/%d] front=%zu events=%zu\n", it, cfg.iterations,
                                 front.members().size(), events);
                };
            }
            const SearchSummary s = search(cfg, hooks);
            std::cout << format_front_report(s.front, cfg.space);
            std::printf("iterations=%d evaluated=%d failed=%d rejected=%d duplicates=%d invalid=%d "
                        "llm_failures=%d%s\n",
                        s.iterations_run, s.evaluated, s.evaluation_failures, s.gate_rejections,
                        s.duplicates, s.invalid_proposals, s.completion_failures,
                        s.interrupted ? " (interrupted)" : "");
            std::printf("ledger: %s digest: %s\n", cfg.ledger_dir.c_str(), s.ledger_digest.c_str());
            return s.interrupted ? 130 : 0;
        }
        if (estimate_cmd->parsed()) {
            const RunConfig cfg = optional_config(space_config);
            ArchitectureConfig arch;
            try {
                arch = load_arch(arch_path, cfg.space);
            } catch (const ParseError& e) {
                return report_parse_error(e);
            }
            const ResourceEstimate est = estimate(arch, cfg.space);
            const GateVerdict verdict = check_constraints(est, cfg.limits);
            nlohmann::ordered_json out;
            out["arch_hash"] = canonical_hash(arch);
            out["estimate"] = estimate_to_json(est);
            if (!layers) out["estimate"].erase("layers");
            out["verdict"] = verdict_to_json(verdict);
            std::cout << out.dump(2) << "\n";
            if (!verdict.accepted()) {
                std::cerr << build_rejection_feedback(verdict) << "\n";
                return 1;
            }
            return 0;
        }
        if (validate_cmd->parsed()) {
            const RunConfig cfg = optional_config(space_config);
            try {
                const ArchitectureConfig arch = load_arch(arch_path, cfg.space);
                std::cout << json{{"ok", true}, {"arch_hash", canonical_hash(arch)}}.dump(2) << "\n";
                return 0;
            } catch (const ParseError& e) {
                return report_parse_error(e);
            }
        }
        if (show_cmd->parsed()) {
            const ParetoFront front = replay(ledger_dir);
            if (as_json) std::cout << front_to_json(front).dump(2) << "\n";
            else std::cout << format_front_report(front, ledger_space(ledger_dir));
            return 0;
        }
        if (replay_cmd->parsed()) {
            const ParetoFront front = replay(ledger_dir);
            std::cout << front_to_json(front).dump(2) << "\n";
            if (!no_verify)
                std::fprintf(stderr, "snapshots verified: %zu\n", verify_ledger(ledger_dir));
            return 0;
        }
        if (select_cmd->parsed()) {
            const bool floor = policy_name == "floor" || policy_name == "min_macs_at_accuracy_floor";
            const ParetoFront front = replay(ledger_dir);
            try {
                const CandidateRecord rec = select_final(
                    front,
                    floor ? SelectionPolicy::MinMacsAtAccuracyFloor
                          : SelectionPolicy::BestAccuracyInBudget,
                    threshold);
                std::cout << record_to_json(rec).dump(2) << "\n";
                return 0;
            } catch (const NoCandidate& e) {
                std::cerr << e.what() << "\n";
                return 1;
            }
        }
        if (explain_cmd->parsed()) {
            RunConfig cfg = optional_config(space_config);
            if (!endpoint.empty()) cfg.llm.endpoint = endpoint;
            if (!mock_script.empty()) {
                cfg.llm.transport = "mock";
                cfg.llm.script_path = mock_script;
            }
            ArchitectureConfig arch;
            try {
                arch = load_arch(arch_path, cfg.space);
            } catch (const ParseError& e) {
                return report_parse_error(e);
            }
            auto transport = make_transport(cfg.llm);
            const Explanation ex = explain(*transport, arch, cfg.decoding, cfg.llm.retry);
            nlohmann::ordered_json out{{"candidate_id", ex.candidate_id},
                                       {"prompt", ex.prompt},
                                       {"response", ex.response},
                                       {"timestamp", ex.timestamp}};
            std::cout << out.dump(2) << "\n";
            return 0;
        }
        if (evaluate_cmd->parsed()) {
            const RunConfig cfg = optional_config(space_config);
            EvaluationRequest req;
            try {
                req.arch = load_arch(arch_path, cfg.space);
            } catch (const ParseError& e) {
                return report_parse_error(e);
            }
            req.candidate_id = req.arch.candidate_id.empty() ? "manual" : req.arch.candidate_id;
            req.phase = *phase_from_string(phase_name);
            req.seed = cfg.seed;
            req.hparams = phase_defaults(req.phase);
            const EvaluationResult res = dispatch_evaluation(req, cfg);
            nlohmann::ordered_json out{{"id", res.candidate_id},
                                       {"status", res.ok() ? "ok" : "failed"}};
            if (res.ok()) out["test_accuracy"] = *res.test_accuracy;
            else out["reason"] = res.failure_reason.value_or("unknown");
            out["wall_seconds"] = res.wall_seconds;
            std::cout << out.dump(2) << "\n";
            return res.ok() ? 0 : 1;
        }
        if (kd_cmd->parsed()) {
            std::ofstream out(out_path);
            if (!out) throw std::runtime_error("cannot write " + out_path);
            out << distill::make_test_vectors(kd_seed, kd_cases).dump(2) << "\n";
            return out ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
