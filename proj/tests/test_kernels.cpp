#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include <omp.h>

#include "llmnas/kernels.hpp"
#include "support.hpp"

using namespace llmnas;

namespace {

std::vector<ArchitectureConfig> archs(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<ArchitectureConfig> out;
    for (int i = 0; i < n; ++i) out.push_back(testing_support::random_arch(SearchSpace{}, rng));
    return out;
}

}  // namespace

TEST_CASE("estimate_batch matches the serial kernel and the scalar estimator") {
    const SearchSpace space;
    const auto in = archs(300, 1);
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        const auto par = kernels::estimate_batch(in, space);
        const auto ser = kernels::estimate_batch_serial(in, space);
        REQUIRE(par.size() == in.size());
        REQUIRE(ser.size() == in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            CHECK(par[i] == ser[i]);
            CHECK(ser[i] == estimate(in[i], space));
        }
    }
    CHECK(kernels::estimate_batch({}, space).empty());
}

TEST_CASE("hash_batch matches the serial kernel") {
    const auto in = archs(500, 2);
    for (int threads : {1, 3, 8}) {
        omp_set_num_threads(threads);
        const auto par = kernels::hash_batch(in);
        const auto ser = kernels::hash_batch_serial(in);
        CHECK(par == ser);
        for (std::size_t i = 0; i < in.size(); i += 50) CHECK(ser[i] == canonical_hash(in[i]));
    }
}

TEST_CASE("nondominated_indices equals the incremental front") {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        std::mt19937_64 rng(seed);
        std::vector<CandidateRecord> rs;
        for (int i = 0; i < 800; ++i) rs.push_back(testing_support::random_record(rng, i));
        // Exact duplicates and metric twins with distinct hashes.
        for (int i = 0; i < 40; ++i) {
            auto d = rs[rng() % rs.size()];
            if (i % 2) d.arch_hash += "-twin";
            d.candidate_id += "-copy" + std::to_string(i);
            rs.push_back(d);
        }

        ParetoFront f;
        for (const auto& r : rs) f.update(r);
        std::set<std::string> expected;
        for (const auto& m : f.members()) expected.insert(m.candidate_id);

        for (int threads : {1, 4}) {
            omp_set_num_threads(threads);
            const auto par = kernels::nondominated_indices(rs);
            const auto ser = kernels::nondominated_indices_serial(rs);
            CHECK(par == ser);
            CHECK(std::is_sorted(par.begin(), par.end()));
            std::set<std::string> got;
            for (auto i : par) got.insert(rs[i].candidate_id);
            CHECK(got == expected);
        }
    }
    CHECK(kernels::nondominated_indices({}).empty());
}

TEST_CASE("max_threads") {
    CHECK(kernels::max_threads() >= 1);
}
