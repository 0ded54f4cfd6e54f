#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <future>

#include "llmnas/evaluator.hpp"
#include "llmnas/orchestrator.hpp"
#include "support.hpp"

using namespace llmnas;
using namespace std::chrono_literals;

namespace {

EvaluationRequest request_for(const std::string& id, std::uint64_t seed = 0) {
    std::mt19937_64 rng(std::hash<std::string>{}(id));
    EvaluationRequest r;
    r.candidate_id = id;
    r.arch = testing_support::random_arch(SearchSpace{}, rng);
    r.seed = seed;
    return r;
}

std::vector<std::string> stub(std::initializer_list<std::string> args) {
    std::vector<std::string> cmd{STUB_EVALUATOR};
    cmd.insert(cmd.end(), args);
    return cmd;
}

}  // namespace

TEST_CASE("surrogate formula") {
    CHECK(std::abs(surrogate_accuracy(100'000'000, 500'000, 0.0) - 35.455) < 1e-3);
    CHECK(surrogate_accuracy(100'000'000, 500'000, 0.0) ==
          doctest::Approx(5 * std::log(100.0) + 2 * std::log(500.0)));
    CHECK(surrogate_accuracy(1'000'000, 1'000, 0.0) == 1.0);
    CHECK(surrogate_accuracy(1'000'000'000'000ull, 1'000'000'000ull, 2.0) == 90.0);
}

TEST_CASE("surrogate noise") {
    const std::string h(64, 'a');
    CHECK(surrogate_noise(h, 1) == surrogate_noise(h, 1));
    CHECK(surrogate_noise(h, 1) != surrogate_noise(h, 2));
    std::mt19937_64 rng(1);
    double lo = 10, hi = -10, sum = 0;
    for (int i = 0; i < 2000; ++i) {
        const double u = surrogate_noise(std::to_string(rng()), 9);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo >= -2.0);
    CHECK(hi < 2.0);
    CHECK(std::abs(sum / 2000) < 0.1);

    // The message is the hash text followed by the seed as 8 big-endian bytes;
    // first 8 digest bytes read big-endian. SHA-256("abc" || 00..01) computed
    // independently with Python's hashlib.
    // hashlib.sha256(b"abc" + (1).to_bytes(8, "big")).hexdigest()[:16]
    //   == "4902dec96bf400e2"
    const double expected = 4.0 * (double(0x4902dec96bf400e2ull) / 18446744073709551616.0) - 2.0;
    CHECK(surrogate_noise("abc", 1) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("surrogate evaluation") {
    ResourceEstimate est;
    est.total_macs = 100'000'000;
    est.total_params = 500'000;
    const auto a = surrogate_evaluate(est, "deadbeef", 3);
    const auto b = surrogate_evaluate(est, "deadbeef", 3);
    REQUIRE(a.ok());
    CHECK(*a.test_accuracy == *b.test_accuracy);
    CHECK(std::abs(*a.test_accuracy - 35.455) <= 2.0);
    est.total_macs = 0;
    CHECK_THROWS_AS(surrogate_evaluate(est, "deadbeef", 3), std::invalid_argument);

    const auto req = request_for("c0001", 3);
    SurrogateEvaluator ev{SearchSpace{}};
    const auto r = ev.evaluate(req);
    REQUIRE(r.ok());
    CHECK(r.candidate_id == "c0001");
    const auto direct = surrogate_evaluate(estimate(req.arch, SearchSpace{}), canonical_hash(req.arch), 3);
    CHECK(*r.test_accuracy == *direct.test_accuracy);

    RunConfig cfg;
    CHECK(*dispatch_evaluation(req, cfg).test_accuracy == *direct.test_accuracy);
}

TEST_CASE("phase hyperparameters") {
    const auto mini = phase_defaults(Phase::Mini);
    CHECK(mini.epochs == 30);
    CHECK(mini.batch_size == 128);
    CHECK(mini.lr_schedule["initial"] == 0.5);
    CHECK(mini.lr_schedule["gamma"] == 0.1);
    CHECK(mini.lr_schedule["step_epochs"] == 10);
    CHECK(mini.lr_schedule["warmup_epochs"] == 10);
    CHECK(mini.momentum == 0.9);
    CHECK(mini.nesterov);
    CHECK(mini.weight_decay == 1e-4);
    CHECK(mini.mixup_alpha == 0.0);
    const auto full = phase_defaults(Phase::Full);
    CHECK(full.epochs == 120);
    CHECK(full.lr_schedule["type"] == "warmup_cosine");
    CHECK(full.lr_schedule["warmup_epochs"] == 20);
    CHECK(full.mixup_alpha == 0.2);
    const auto kd = phase_defaults(Phase::Kd);
    CHECK(kd.epochs == 50);
    REQUIRE(kd.kd.has_value());
    CHECK(kd.kd->temperature == 10.0);
    CHECK(kd.kd->alpha0 == 0.4);
    CHECK(kd.kd->alpha_final == 0.8);
    CHECK(hyperparams_to_json(kd)["kd"]["temperature"] == 10.0);
}

TEST_CASE("protocol encoding") {
    const auto req = request_for("c0005", 11);
    const auto j = nlohmann::json::parse(encode_request(req));
    CHECK(j["id"] == "c0005");
    CHECK(j["phase"] == "mini");
    CHECK(j["seed"] == 11);
    CHECK(j["hparams"]["epochs"] == 30);
    CHECK(parse_architecture(j["arch"], SearchSpace{}).stages == req.arch.stages);
    CHECK(encode_request(req).find('\n') == std::string::npos);

    auto r = decode_response(R"({"id":"c1","status":"ok","test_accuracy":61.9,"wall_seconds":12.5})", "c1");
    CHECK(r.ok());
    CHECK(*r.test_accuracy == 61.9);
    CHECK(r.wall_seconds == 12.5);
    r = decode_response(R"({"id":"c1","status":"failed","reason":"nan loss"})", "c1");
    CHECK_FALSE(r.ok());
    CHECK(*r.failure_reason == "nan loss");
    CHECK_FALSE(r.test_accuracy.has_value());
    for (const char* bad : {"nope", R"({"status":"ok"})", R"({"id":"c2","status":"ok","test_accuracy":1})",
                            R"({"id":"c1","status":"ok"})", R"({"id":"c1","status":"ok","test_accuracy":140})",
                            R"({"id":"c1","status":"maybe"})"}) {
        r = decode_response(bad, "c1");
        CHECK_FALSE(r.ok());
        CHECK(r.failure_reason->rfind("protocol-violation", 0) == 0);
    }
}

TEST_CASE("external evaluator") {
    SUBCASE("echo") {
        SubprocessEvaluator ev(stub({"echo"}), 1, 10s);
        const auto r = ev.evaluate(request_for("c0001"));
        REQUIRE(r.ok());
        CHECK(*r.test_accuracy == 50.0);
        CHECK(r.candidate_id == "c0001");
        CHECK(ev.evaluate(request_for("c0002")).ok());
    }
    SUBCASE("matches the in-process surrogate") {
        SubprocessEvaluator ev(stub({"surrogate"}), 2, 10s);
        SurrogateEvaluator local{SearchSpace{}};
        for (int i = 0; i < 6; ++i) {
            const auto req = request_for("c" + std::to_string(i), 42);
            CHECK(*ev.evaluate(req).test_accuracy == *local.evaluate(req).test_accuracy);
        }
    }
    SUBCASE("malformed output") {
        SubprocessEvaluator ev(stub({"malformed"}), 1, 10s);
        const auto r = ev.evaluate(request_for("c0001"));
        CHECK_FALSE(r.ok());
        CHECK(r.failure_reason->rfind("protocol-violation", 0) == 0);
    }
    SUBCASE("mismatched id") {
        SubprocessEvaluator ev(stub({"wrong-id"}), 1, 10s);
        CHECK(ev.evaluate(request_for("c0001")).failure_reason->rfind("protocol-violation", 0) == 0);
    }
    SUBCASE("reported failure") {
        SubprocessEvaluator ev(stub({"fail"}), 1, 10s);
        CHECK(*ev.evaluate(request_for("c0001")).failure_reason == "cuda out of memory");
    }
    SUBCASE("timeout") {
        SubprocessEvaluator ev(stub({"hang"}), 1, 300ms);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = ev.evaluate(request_for("c0001"));
        CHECK_FALSE(r.ok());
        CHECK(r.failure_reason->rfind("timeout", 0) == 0);
        CHECK(std::chrono::steady_clock::now() - t0 < 5s);
    }
    SUBCASE("crash") {
        SubprocessEvaluator ev(stub({"crash"}), 1, 10s);
        const auto r = ev.evaluate(request_for("c0001"));
        CHECK_FALSE(r.ok());
        CHECK(r.failure_reason->rfind("evaluator-crash", 0) == 0);
    }
    SUBCASE("restart after a crash") {
        SubprocessEvaluator ev(stub({"crash-on", "c0002"}), 1, 10s);
        CHECK(ev.evaluate(request_for("c0001")).ok());
        CHECK(ev.evaluate(request_for("c0002")).failure_reason->rfind("evaluator-crash", 0) == 0);
        CHECK(ev.evaluate(request_for("c0003")).ok());
    }
    SUBCASE("concurrent requests over a pool") {
        SubprocessEvaluator ev(stub({"surrogate"}), 3, 10s);
        std::vector<std::future<EvaluationResult>> fs;
        for (int i = 0; i < 12; ++i)
            fs.push_back(std::async(std::launch::async, [&, i] {
                return ev.evaluate(request_for("p" + std::to_string(i)));
            }));
        for (int i = 0; i < 12; ++i) {
            const auto r = fs[i].get();
            CHECK(r.ok());
            CHECK(r.candidate_id == "p" + std::to_string(i));
        }
    }
}

TEST_CASE("evaluator selection") {
    EvaluatorSettings s;
    CHECK(dynamic_cast<SurrogateEvaluator*>(make_evaluator(s, SearchSpace{}).get()) != nullptr);
    s.kind = "external";
    CHECK_THROWS_AS(make_evaluator(s, SearchSpace{}), EvaluatorUnavailable);
    s.command = {"/nonexistent/trainer"};
    CHECK_THROWS_AS(make_evaluator(s, SearchSpace{}), EvaluatorUnavailable);
    s.command = stub({"echo"});
    CHECK(make_evaluator(s, SearchSpace{}) != nullptr);
    s.kind = "gpu";
    CHECK_THROWS(make_evaluator(s, SearchSpace{}));
}
