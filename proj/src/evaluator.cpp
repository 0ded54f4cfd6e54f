#include "llmnas/evaluator.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "llmnas/digest.hpp"

extern char** environ;

namespace llmnas {

using nlohmann::json;
using nlohmann::ordered_json;

PhaseHyperparams phase_defaults(Phase phase) {
    PhaseHyperparams hp;
    switch (phase) {
    case Phase::Mini:
        hp.epochs = 30;
        hp.lr_schedule = {{"type", "step"}, {"initial", 0.5}, {"gamma", 0.1},
                          {"step_epochs", 10}, {"warmup_epochs", 10}};
        hp.autoaugment = true;
        hp.mixup_alpha = 0.0;
        break;
    case Phase::Full:
        hp.epochs = 120;
        hp.lr_schedule = {{"type", "warmup_cosine"}, {"start", 0.0}, {"peak", 0.5},
                          {"warmup_epochs", 20}};
        hp.autoaugment = true;
        hp.mixup_alpha = 0.2;
        break;
    case Phase::Kd:
        hp.epochs = 50;
        hp.lr_schedule = {{"type", "warmup_cosine"}, {"start", 0.0}, {"peak", 0.5},
                          {"warmup_epochs", 20}};
        hp.autoaugment = false;
        hp.mixup_alpha = 0.0;
        hp.kd = KdSettings{};
        break;
    }
    return hp;
}

ordered_json hyperparams_to_json(const PhaseHyperparams& hp) {
    ordered_json j;
    j["epochs"] = hp.epochs;
    j["batch_size"] = hp.batch_size;
    j["lr_schedule"] = hp.lr_schedule;
    j["optimizer"] = {{"type", "sgd"},
                      {"momentum", hp.momentum},
                      {"nesterov", hp.nesterov},
                      {"weight_decay", hp.weight_decay}};
    j["augmentation"] = {{"autoaugment", hp.autoaugment}, {"mixup_alpha", hp.mixup_alpha}};
    if (hp.kd) {
        j["kd"] = {{"teacher", hp.kd->teacher},
                   {"temperature", hp.kd->temperature},
                   {"alpha0", hp.kd->alpha0},
                   {"alpha_final", hp.kd->alpha_final}};
    }
    return j;
}

std::string encode_request(const EvaluationRequest& req) {
    ordered_json j;
    j["id"] = req.candidate_id;
    j["arch"] = architecture_to_json(req.arch);
    j["phase"] = to_string(req.phase);
    j["seed"] = req.seed;
    j["hparams"] = hyperparams_to_json(req.hparams);
    return j.dump();
}

EvaluationResult decode_response(const std::string& line, const std::string& expected_id) {
    EvaluationResult r;
    r.candidate_id = expected_id;
    auto violation = [&](const std::string& why) {
        r.status = EvaluationResult::Status::Failed;
        r.test_accuracy.reset();
        r.failure_reason = "protocol-violation: " + why;
        return r;
    };
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return violation("response is not a JSON object");
    const auto id = j.find("id");
    if (id == j.end() || !id->is_string()) return violation("missing id");
    if (id->get<std::string>() != expected_id)
        return violation("id " + id->get<std::string>() + " does not match " + expected_id);
    const auto status = j.find("status");
    if (status == j.end() || !status->is_string()) return violation("missing status");
    if (auto w = j.find("wall_seconds"); w != j.end() && w->is_number())
        r.wall_seconds = w->get<double>();

    if (*status == "ok") {
        const auto acc = j.find("test_accuracy");
        if (acc == j.end() || !acc->is_number()) return violation("ok response without test_accuracy");
        const double a = acc->get<double>();
        if (!(a >= 0.0 && a <= 100.0)) return violation("test_accuracy outside [0, 100]");
        r.status = EvaluationResult::Status::Ok;
        r.test_accuracy = a;
        return r;
    }
    if (*status == "failed") {
        r.status = EvaluationResult::Status::Failed;
        const auto reason = j.find("reason");
        r.failure_reason = (reason != j.end() && reason->is_string()) ? reason->get<std::string>()
                                                                      : "evaluator reported failure";
        return r;
    }
    return violation("unknown status " + status->dump());
}

double surrogate_accuracy(std::uint64_t macs, std::uint64_t params, double u) {
    const double raw = 5.0 * std::log(static_cast<double>(macs) / 1e6) +
                       2.0 * std::log(static_cast<double>(params) / 1e3) + u;
    return std::clamp(raw, 1.0, 90.0);
}

double surrogate_noise(const std::string& candidate_hash, std::uint64_t seed) {
    std::string msg = candidate_hash;
    for (int shift = 56; shift >= 0; shift -= 8)
        msg.push_back(static_cast<char>((seed >> shift) & 0xff));
    const Sha256 d = sha256(msg);
    std::uint64_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d[static_cast<std::size_t>(i)];
    return 4.0 * (static_cast<double>(h) * 0x1.0p-64) - 2.0;
}

EvaluationResult surrogate_evaluate(const ResourceEstimate& est, const std::string& candidate_hash,
                                    std::uint64_t seed) {
    if (est.total_macs == 0 || est.total_params == 0)
        throw std::invalid_argument("surrogate_evaluate needs non-zero totals");
    EvaluationResult r;
    r.status = EvaluationResult::Status::Ok;
    r.test_accuracy = surrogate_accuracy(est.total_macs, est.total_params,
                                         surrogate_noise(candidate_hash, seed));
    return r;
}

EvaluationResult SurrogateEvaluator::evaluate(const EvaluationRequest& req) {
    const auto start = std::chrono::steady_clock::now();
    EvaluationResult r;
    try {
        r = surrogate_evaluate(estimate(req.arch, space_), canonical_hash(req.arch), req.seed);
    } catch (const std::exception& e) {
        r.status = EvaluationResult::Status::Failed;
        r.failure_reason = e.what();
    }
    r.candidate_id = req.candidate_id;
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// ---------------------------------------------------------------------------
// Subprocess pool

namespace {

bool executable_on_path(const std::string& cmd) {
    if (cmd.find('/') != std::string::npos) return ::access(cmd.c_str(), X_OK) == 0;
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::stringstream ss(path);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
        const std::string full = (dir.empty() ? "." : dir) + "/" + cmd;
        if (::access(full.c_str(), X_OK) == 0) return true;
    }
    return false;
}

enum class ReadStatus { Line, Timeout, Eof };

}  // namespace

struct SubprocessEvaluator::Worker {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::string buffer;

    bool alive() const { return pid > 0; }

    void spawn(const std::vector<std::string>& command) {
        int in_pipe[2], out_pipe[2];
        if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EvaluatorUnavailable(std::strerror(errno));
        if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw EvaluatorUnavailable(std::strerror(errno));
        }
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

        std::vector<char*> argv;
        for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        if (rc != 0) {
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            pid = -1;
            throw EvaluatorUnavailable(command[0] + ": " + std::strerror(rc));
        }
        to_child = in_pipe[1];
        from_child = out_pipe[0];
        buffer.clear();
    }

    bool write_line(const std::string& line) {
        std::string data = line + "\n";
        const char* p = data.data();
        std::size_t left = data.size();
        while (left > 0) {
            const ssize_t n = ::write(to_child, p, left);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
        return true;
    }

    ReadStatus read_line(std::chrono::steady_clock::time_point deadline, std::string& line) {
        for (;;) {
            if (auto nl = buffer.find('\n'); nl != std::string::npos) {
                line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                return ReadStatus::Line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) return ReadStatus::Timeout;
            pollfd pfd{from_child, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 60'000)));
            if (pr < 0 && errno != EINTR) return ReadStatus::Eof;
            if (pr <= 0) continue;
            char chunk[4096];
            const ssize_t n = ::read(from_child, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return ReadStatus::Eof;
            buffer.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void kill_now() {
        if (!alive()) return;
        ::kill(pid, SIGKILL);
        ::waitpid(pid, nullptr, 0);
        close_fds();
    }

    void shutdown() {
        if (!alive()) return;
        ::close(to_child);
        to_child = -1;
        for (int i = 0; i < 100; ++i) {
            if (::waitpid(pid, nullptr, WNOHANG) == pid) {
                pid = -1;
                close_fds();
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        kill_now();
    }

    void close_fds() {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        to_child = from_child = -1;
        pid = -1;
        buffer.clear();
    }
};

SubprocessEvaluator::SubprocessEvaluator(std::vector<std::string> command, int processes,
                                         std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
    if (command_.empty()) throw EvaluatorUnavailable("no evaluator command configured");
    if (!executable_on_path(command_[0]))
        throw EvaluatorUnavailable(command_[0] + " is not an executable");
    if (processes < 1) throw std::invalid_argument("parallel evaluations must be >= 1");
    // A dead child must surface as a failed write, not a fatal signal.
    std::signal(SIGPIPE, SIG_IGN);
    for (int i = 0; i < processes; ++i) {
        workers_.push_back(std::make_unique<Worker>());
        idle_.push_back(workers_.back().get());
    }
}

SubprocessEvaluator::~SubprocessEvaluator() {
    for (auto& w : workers_) w->shutdown();
}

EvaluationResult SubprocessEvaluator::evaluate(const EvaluationRequest& req) {
    Worker* w = nullptr;
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !idle_.empty(); });
        w = idle_.back();
        idle_.pop_back();
    }
    const auto start = std::chrono::steady_clock::now();
    EvaluationResult r;
    r.candidate_id = req.candidate_id;
    auto fail = [&](std::string reason) {
        r.status = EvaluationResult::Status::Failed;
        r.test_accuracy.reset();
        r.failure_reason = std::move(reason);
    };

    try {
        if (!w->alive()) w->spawn(command_);
        std::string line;
        if (!w->write_line(encode_request(req))) {
            w->kill_now();
            fail("evaluator-crash: could not write request");
        } else {
            switch (w->read_line(start + timeout_, line)) {
            case ReadStatus::Line:
                r = decode_response(line, req.candidate_id);
                break;
            case ReadStatus::Timeout:
                w->kill_now();
                fail("timeout: no response within " + std::to_string(timeout_.count()) + " ms");
                break;
            case ReadStatus::Eof:
                w->kill_now();
                fail("evaluator-crash: evaluator closed its output");
                break;
            }
        }
    } catch (const std::exception& e) {
        fail(e.what());
    }
    if (r.wall_seconds == 0.0)
        r.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    {
        std::lock_guard lock(mu_);
        idle_.push_back(w);
    }
    cv_.notify_one();
    return r;
}

std::unique_ptr<Evaluator> make_evaluator(const EvaluatorSettings& settings,
                                          const SearchSpace& space) {
    if (settings.parallel < 1) throw std::invalid_argument("parallel evaluations must be >= 1");
    if (settings.kind == "surrogate") return std::make_unique<SurrogateEvaluator>(space);
    if (settings.kind == "external") {
        return std::make_unique<SubprocessEvaluator>(
            settings.command, settings.parallel,
            std::chrono::milliseconds(static_cast<long long>(settings.timeout_seconds * 1000.0)));
    }
    throw std::invalid_argument("unknown evaluator kind: " + settings.kind);
}

}  // namespace llmnas
