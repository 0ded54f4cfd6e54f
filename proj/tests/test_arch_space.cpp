#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <unordered_set>

#include "llmnas/arch_space.hpp"
#include "support.hpp"

using namespace llmnas;
using testing_support::random_arch;

namespace {

StageConfig sample_stage() {
    StageConfig st;
    st.kernel = 3;
    st.stride = 2;
    st.out_channels = 16;
    st.expansion = 3;
    st.se = false;
    st.conv_block = ConvBlock::DWSepConv;
    st.skip = false;
    st.activation = Activation::ReLU6;
    st.layers = 1;
    return st;
}

const char* kSampleDoc = R"({"stages":[
  {"out_channels":16,"kernel":3,"stride":2,"expansion":3,"se":false,"se_ratio":0.25,"conv_block":"dwsepconv","skip":false,"activation":"relu6","layers":1},
  {"out_channels":24,"kernel":5,"stride":2,"expansion":4,"se":true,"se_ratio":0.25,"conv_block":"mbconv","skip":true,"activation":"swish","layers":2},
  {"out_channels":48,"kernel":3,"stride":2,"expansion":6,"se":true,"se_ratio":0.5,"conv_block":"mbconv","skip":true,"activation":"leakyrelu","layers":3},
  {"out_channels":96,"kernel":7,"stride":1,"expansion":4,"se":false,"conv_block":"mbconv","skip":true,"activation":"relu6","layers":4},
  {"out_channels":160,"kernel":3,"stride":2,"expansion":6,"se":true,"se_ratio":0.25,"conv_block":"dwsepconv","skip":false,"activation":"swish","layers":6}
]})";

template <typename T>
std::vector<T> first_two(const std::vector<T>& v) {
    return {v.begin(), v.begin() + std::min<std::size_t>(2, v.size())};
}

}  // namespace

TEST_CASE("default space matches the published choice lists") {
    const SearchSpace s;
    CHECK(s.stage_count == 5);
    CHECK(s.out_channel_choices == std::vector<int>{16, 24, 32, 48, 64, 96, 128, 160});
    CHECK(s.kernel_choices == std::vector<int>{3, 5, 7});
    CHECK(s.stride_choices == std::vector<int>{1, 2});
    CHECK(s.expansion_choices == std::vector<int>{3, 4, 6});
    CHECK(s.se_ratio_choices == std::vector<double>{0.25, 0.5});
    CHECK(s.layers_choices == std::vector<int>{1, 2, 3, 4, 6});
    CHECK(s.activation_choices.size() == 3);
    CHECK(s.conv_block_choices.size() == 2);
    CHECK(s.input_resolution == 160);
    CHECK(s.num_classes == 100);
    CHECK_NOTHROW(check_search_space(s));
}

TEST_CASE("search space invariants are enforced") {
    SearchSpace s;
    s.kernel_choices = {3, 3};
    CHECK_THROWS_AS(check_search_space(s), std::invalid_argument);
    s = {};
    s.kernel_choices = {};
    CHECK_THROWS_AS(check_search_space(s), std::invalid_argument);
    s = {};
    s.kernel_choices = {4};
    CHECK_THROWS_AS(check_search_space(s), std::invalid_argument);
    s = {};
    s.stride_choices = {3};
    CHECK_THROWS_AS(check_search_space(s), std::invalid_argument);
    s = {};
    s.se_ratio_choices = {0.0};
    CHECK_THROWS_AS(check_search_space(s), std::invalid_argument);
}

TEST_CASE("stage cardinality") {
    SearchSpace s;
    CHECK(count_stage_configs(s) == 17'280);
    CHECK(count_stage_configs(s) == 3ull * 2 * 2 * 2 * 2 * 3 * 3 * 5 * 8);

    s.kernel_choices = {3};
    CHECK(count_stage_configs(s) == 5'760);

    SearchSpace one;
    one.out_channel_choices = {16};
    one.kernel_choices = {3};
    one.stride_choices = {1};
    one.expansion_choices = {3};
    one.se_enable_choices = {false};
    one.se_ratio_choices = {0.25};
    one.conv_block_choices = {ConvBlock::MBConv};
    one.skip_choices = {true};
    one.activation_choices = {Activation::Swish};
    one.layers_choices = {2};
    CHECK(count_stage_configs(one) == 1);
}

TEST_CASE("stage cardinality agrees with exhaustive enumeration of a truncated space") {
    const SearchSpace full;
    SearchSpace s = full;
    s.out_channel_choices = first_two(full.out_channel_choices);
    s.kernel_choices = first_two(full.kernel_choices);
    s.expansion_choices = first_two(full.expansion_choices);
    s.activation_choices = first_two(full.activation_choices);
    s.layers_choices = first_two(full.layers_choices);
    s.se_ratio_choices = {0.25};

    std::set<std::string> distinct;
    std::size_t accepted = 0;
    for (int c : s.out_channel_choices)
        for (int k : s.kernel_choices)
            for (int st : s.stride_choices)
                for (int e : s.expansion_choices)
                    for (bool se : s.se_enable_choices)
                        for (ConvBlock cb : s.conv_block_choices)
                            for (bool sk : s.skip_choices)
                                for (Activation a : s.activation_choices)
                                    for (int l : s.layers_choices) {
                                        StageConfig cfg{c, k, st, e, se, std::nullopt, cb, sk, a, l};
                                        if (se) cfg.se_ratio = 0.25;
                                        if (validate_stage(cfg, s).ok()) ++accepted;
                                        distinct.insert(stage_to_json(cfg).dump());
                                    }
    CHECK(accepted == count_stage_configs(s));
    CHECK(distinct.size() == count_stage_configs(s));
    CHECK(accepted == 512);
}

TEST_CASE("validate_stage") {
    const SearchSpace space;
    CHECK(validate_stage(sample_stage(), space).ok());

    SUBCASE("kernel outside the space") {
        StageConfig st = sample_stage();
        st.kernel = 4;
        const auto v = validate_stage(st, space).violations;
        REQUIRE(v.size() == 1);
        CHECK(v[0].field == "kernel");
        CHECK(v[0].value == "4");
        CHECK(v[0].allowed == "{3, 5, 7}");
    }
    SUBCASE("two violations are both reported") {
        StageConfig st = sample_stage();
        st.expansion = 5;
        st.se = true;
        st.se_ratio = 0.3;
        const auto v = validate_stage(st, space).violations;
        REQUIRE(v.size() == 2);
        CHECK(v[0].field == "expansion");
        CHECK(v[1].field == "se_ratio");
        CHECK(v[1].allowed == "{0.25, 0.5}");
    }
    SUBCASE("se without a ratio") {
        StageConfig st = sample_stage();
        st.se = true;
        const auto v = validate_stage(st, space).violations;
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == Violation::Kind::Missing);
    }
}

TEST_CASE("validate_architecture") {
    const SearchSpace space;
    ArchitectureConfig a;
    a.stages.assign(5, sample_stage());
    CHECK(validate_architecture(a, space).ok());

    ArchitectureConfig four = a;
    four.stages.pop_back();
    auto v = validate_architecture(four, space).violations;
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == Violation::Kind::StageCount);
    CHECK(v[0].value == "4");
    CHECK(v[0].allowed == "5");

    ArchitectureConfig seven = a;
    seven.stages[2].layers = 7;
    v = validate_architecture(seven, space).violations;
    REQUIRE(v.size() == 1);
    CHECK(v[0].stage == 3);
    CHECK(v[0].field == "layers");
    CHECK(v[0].allowed == "{1, 2, 3, 4, 6}");
}

TEST_CASE("canonical hash") {
    const SearchSpace space;
    std::mt19937_64 rng(11);
    ArchitectureConfig a = random_arch(space, rng);
    const std::string h = canonical_hash(a);
    CHECK(h.size() == 64);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(canonical_hash(a) == h);

    ArchitectureConfig b = a;
    b.candidate_id = "other";
    b.source = CandidateSource::Replay;
    CHECK(canonical_hash(b) == h);

    ArchitectureConfig c = a;
    c.stages[1].activation =
        c.stages[1].activation == Activation::Swish ? Activation::ReLU6 : Activation::Swish;
    CHECK(canonical_hash(c) != h);

    const std::string ser = canonical_serialization(a);
    CHECK(ser.find(' ') == std::string::npos);
    CHECK(ser.find("candidate_id") == std::string::npos);
    CHECK(ser.rfind("{\"stages\":[{\"out_channels\":", 0) == 0);
}

TEST_CASE("parse the sample document") {
    const SearchSpace space;
    const ArchitectureConfig a = parse_architecture(kSampleDoc, space);
    REQUIRE(a.stages.size() == 5);
    CHECK(a.stages[0].out_channels == 16);
    CHECK(a.stages[1].conv_block == ConvBlock::MBConv);
    CHECK(a.stages[2].activation == Activation::LeakyReLU);
    CHECK_FALSE(a.stages[3].se_ratio.has_value());
    CHECK(a.stages[4].layers == 6);
    CHECK(validate_architecture(a, space).ok());
}

TEST_CASE("parse errors") {
    const SearchSpace space;
    auto kind_of = [&](std::string_view text) {
        try {
            parse_architecture(text, space);
        } catch (const ParseError& e) {
            return std::optional(e.kind());
        }
        return std::optional<ParseError::Kind>();
    };
    CHECK(kind_of("{\"stages\": [") == ParseError::Kind::Malformed);
    CHECK(kind_of("{}") == ParseError::Kind::Schema);
    CHECK(kind_of("[1,2]") == ParseError::Kind::Schema);

    nlohmann::json doc = nlohmann::json::parse(kSampleDoc);
    doc["stages"][1]["kernel"] = 9;
    try {
        parse_architecture(doc.dump(), space);
        FAIL("kernel 9 accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::Space);
        REQUIRE(e.details().size() == 1);
        CHECK(e.details()[0].find("{3, 5, 7}") != std::string::npos);
        CHECK(e.details()[0].find("stage 2") != std::string::npos);
    }

    doc = nlohmann::json::parse(kSampleDoc);
    doc["stages"][0]["dropout"] = 0.2;
    doc["notes"] = "wide";
    try {
        parse_architecture(doc.dump(), space);
        FAIL("unknown keys accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::Schema);
        CHECK(e.details().size() == 2);
        CHECK(std::string(e.what()).find("$.stages[0].dropout") != std::string::npos);
    }

    doc = nlohmann::json::parse(kSampleDoc);
    doc["stages"][0]["activation"] = "gelu";
    doc["stages"][3]["layers"] = 5;
    try {
        parse_architecture(doc.dump(), space);
        FAIL("out-of-space values accepted");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseError::Kind::Space);
        CHECK(e.details().size() == 2);
    }

    doc = nlohmann::json::parse(kSampleDoc);
    doc["stages"][0]["kernel"] = "3";
    CHECK(kind_of(doc.dump()) == ParseError::Kind::Schema);
}

TEST_CASE("dwconv is read as the depthwise-separable block") {
    nlohmann::json doc = nlohmann::json::parse(kSampleDoc);
    doc["stages"][0]["conv_block"] = "dwconv";
    const auto a = parse_architecture(doc.dump(), SearchSpace{});
    CHECK(a.stages[0].conv_block == ConvBlock::DWSepConv);
    CHECK(canonical_serialization(a).find("dwconv\"") == std::string::npos);
}

TEST_CASE("serialize then parse is the identity on random valid architectures") {
    const SearchSpace space;
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 2000; ++i) {
        ArchitectureConfig a = random_arch(space, rng);
        a.candidate_id = "c" + std::to_string(i);
        a.source = CandidateSource::Llm;
        const ArchitectureConfig back =
            parse_architecture(architecture_to_json(a, true).dump(), space);
        REQUIRE(back == a);
        REQUIRE(canonical_hash(back) == canonical_hash(a));
    }
}

TEST_CASE("no digest collisions across distinct random architectures") {
    const SearchSpace space;
    std::mt19937_64 rng(7);
    std::unordered_set<std::string> serials;
    std::unordered_set<std::string> digests;
    while (serials.size() < 10'000) {
        const ArchitectureConfig a = random_arch(space, rng);
        if (serials.insert(canonical_serialization(a)).second) digests.insert(canonical_hash(a));
    }
    CHECK(digests.size() == serials.size());
}

TEST_CASE("single out-of-space mutations are always rejected") {
    const SearchSpace space;
    std::mt19937_64 rng(99);
    for (int i = 0; i < 3000; ++i) {
        StageConfig st = testing_support::random_stage(space, rng);
        REQUIRE(validate_stage(st, space).ok());
        switch (rng() % 7) {
        case 0: st.out_channels = 17 + int(rng() % 100) * 2; break;  // odd, never listed
        case 1: st.kernel = 9 + 2 * int(rng() % 4); break;
        case 2: st.stride = 3 + int(rng() % 3); break;
        case 3: st.expansion = 5; break;
        case 4: st.se = true; st.se_ratio = 0.3; break;
        case 5: st.layers = 5 + 2 * int(rng() % 3); break;
        case 6: st.layers = 0; break;
        }
        CHECK_FALSE(validate_stage(st, space).ok());
        CHECK(validate_stage(st, space).violations.size() == 1);
    }
}

TEST_CASE("search space document round trip") {
    SearchSpace s;
    s.kernel_choices = {3, 5};
    s.num_classes = 10;
    const SearchSpace back = search_space_from_json(nlohmann::json::parse(search_space_to_json(s).dump()));
    CHECK(back == s);
    const std::string doc = search_space_document(SearchSpace{});
    CHECK(doc.find("\"kernel\"") != std::string::npos);
}
