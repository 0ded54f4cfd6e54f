#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmnas/arch_space.hpp"
#include "llmnas/pareto.hpp"
#include "llmnas/resource_estimator.hpp"

namespace testing_support {

template <typename T>
T pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline llmnas::StageConfig random_stage(const llmnas::SearchSpace& space, std::mt19937_64& rng,
                                        int max_layers = 0) {
    llmnas::StageConfig st;
    st.out_channels = pick(space.out_channel_choices, rng);
    st.kernel = pick(space.kernel_choices, rng);
    st.stride = pick(space.stride_choices, rng);
    st.expansion = pick(space.expansion_choices, rng);
    st.se = pick(space.se_enable_choices, rng);
    if (st.se || rng() % 2) st.se_ratio = pick(space.se_ratio_choices, rng);
    st.conv_block = pick(space.conv_block_choices, rng);
    st.skip = pick(space.skip_choices, rng);
    st.activation = pick(space.activation_choices, rng);
    std::vector<int> layers;
    for (int l : space.layers_choices)
        if (max_layers == 0 || l <= max_layers) layers.push_back(l);
    st.layers = pick(layers, rng);
    return st;
}

inline llmnas::ArchitectureConfig random_arch(const llmnas::SearchSpace& space, std::mt19937_64& rng,
                                              int max_layers = 0) {
    llmnas::ArchitectureConfig a;
    for (int i = 0; i < space.stage_count; ++i) a.stages.push_back(random_stage(space, rng, max_layers));
    return a;
}

// Draws random architectures until one's estimate satisfies `want`.
template <typename Pred>
llmnas::ArchitectureConfig arch_where(const llmnas::SearchSpace& space, std::mt19937_64& rng, Pred want) {
    for (int tries = 0; tries < 200000; ++tries) {
        auto a = random_arch(space, rng);
        if (want(llmnas::estimate(a, space))) return a;
    }
    throw std::runtime_error("arch_where: no architecture found");
}

inline llmnas::CandidateRecord random_record(std::mt19937_64& rng, int index) {
    llmnas::CandidateRecord r;
    r.candidate_id = "r" + std::to_string(index);
    r.arch_hash = std::to_string(rng());
    // Coarse grids so ties and exact duplicates on single objectives occur.
    r.accuracy = llmnas::round_accuracy(std::uniform_int_distribution<int>(2000, 8000)(rng) / 100.0);
    r.macs = std::uniform_int_distribution<std::uint64_t>(70, 350)(rng) * 1'000'000;
    r.params = std::uniform_int_distribution<std::uint64_t>(100, 2000)(rng) * 1'000;
    r.iteration = index;
    return r;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag = "llmnas") {
        std::string tmpl = (std::filesystem::temp_directory_path() / (tag + "-XXXXXX")).string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Chat reply wrapping an architecture the way an instruction-tuned model does.
inline std::string fenced_reply(const nlohmann::json& arch_doc) {
    return "Here is the proposed architecture:\n```json\n" + arch_doc.dump(2) + "\n```\n";
}

inline void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
    std::ofstream out(path);
    for (const auto& l : lines) out << l.dump() << "\n";
}

}  // namespace testing_support
