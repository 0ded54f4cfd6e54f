#include "llmnas/resource_estimator.hpp"

#include <algorithm>
#include <cmath>

namespace llmnas {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(GateViolation::Kind kind) {
    switch (kind) {
    case GateViolation::Kind::MacsLow: return "macs_low";
    case GateViolation::Kind::MacsHigh: return "macs_high";
    case GateViolation::Kind::Sram: return "sram";
    }
    return "?";
}

int se_hidden_channels(int channels, double ratio) {
    return std::max(1, static_cast<int>(std::floor(channels * ratio)));
}

namespace {

using u64 = std::uint64_t;

// Walks the network once and records shape and cost for every layer.
class LayerWalker {
public:
    explicit LayerWalker(TensorShape input) : shape_(input) {
        if (input.height <= 0 || input.width <= 0 || input.channels <= 0)
            throw DegenerateShape("input shape must be strictly positive");
    }

    void stem() {
        const TensorShape in = shape_;
        const TensorShape out{strided_extent(in.height, kStemStride),
                              strided_extent(in.width, kStemStride), kStemChannels};
        const u64 kk = u64(kStemKernel) * kStemKernel;
        push("stem.conv", in, out, kk * in.channels * out.elements(),
             kk * in.channels * kStemChannels + 2 * u64(kStemChannels), 0);
    }

    void block(const std::string& prefix, const StageConfig& st, int stride) {
        if (st.out_channels <= 0 || st.kernel <= 0 || st.expansion <= 0 || stride <= 0)
            throw std::invalid_argument(prefix + ": non-positive stage parameter");
        const TensorShape x = shape_;
        const bool skip_active = st.skip && stride == 1 && x.channels == st.out_channels;
        const u64 held = skip_active ? x.elements() : 0;
        bool first = true;
        auto resident = [&] { return first ? u64(0) : held; };

        TensorShape z = x;
        if (st.conv_block == ConvBlock::MBConv) {
            const TensorShape expanded{x.height, x.width, x.channels * st.expansion};
            push(prefix + ".expand", x, expanded, u64(x.channels) * expanded.elements(),
                 u64(x.channels) * expanded.channels + 2 * u64(expanded.channels), resident());
            first = false;
            z = expanded;
        }

        const TensorShape dw{strided_extent(z.height, stride), strided_extent(z.width, stride),
                             z.channels};
        if (dw.height <= 0 || dw.width <= 0) throw DegenerateShape(prefix + ": spatial dim is 0");
        const u64 kk = u64(st.kernel) * st.kernel;
        push(prefix + ".dwconv", z, dw, kk * dw.elements(), kk * dw.channels + 2 * u64(dw.channels),
             resident());
        first = false;

        if (st.se) {
            const u64 c = dw.channels;
            const u64 cr = se_hidden_channels(dw.channels, st.se_ratio.value_or(0.25));
            const u64 pool = dw.elements();
            const u64 scale = dw.elements();
            push(prefix + ".se", dw, dw, pool + c * cr + cr * c + scale, c * cr + cr + cr * c + c,
                 resident());
        }

        const TensorShape pw{dw.height, dw.width, st.out_channels};
        push(prefix + ".pwconv", dw, pw, u64(dw.channels) * pw.elements(),
             u64(dw.channels) * pw.channels + 2 * u64(pw.channels), resident());

        if (skip_active) push(prefix + ".add", pw, pw, pw.elements(), 0, held);
    }

    void head(int num_classes) {
        const TensorShape in = shape_;
        const TensorShape pooled{1, 1, in.channels};
        push("head.gap", in, pooled, in.elements(), 0, 0);
        const TensorShape logits{1, 1, num_classes};
        push("head.fc", pooled, logits, u64(in.channels) * num_classes,
             u64(in.channels) * num_classes + u64(num_classes), 0);
    }

    std::vector<LayerShape> shapes;
    std::vector<LayerCost> costs;

private:
    void push(std::string label, TensorShape in, TensorShape out, u64 macs, u64 params,
              u64 resident_extra) {
        shapes.push_back({label, in, out});
        costs.push_back({std::move(label), macs, params, in.elements(), out.elements(),
                         resident_extra});
        shape_ = out;
    }

    TensorShape shape_;
};

LayerWalker walk(const ArchitectureConfig& arch, TensorShape input, int num_classes) {
    if (num_classes < 1) throw std::invalid_argument("num_classes must be positive");
    LayerWalker w(input);
    w.stem();
    for (std::size_t i = 0; i < arch.stages.size(); ++i) {
        const auto& st = arch.stages[i];
        for (int b = 1; b <= st.layers; ++b) {
            w.block("stage" + std::to_string(i + 1) + ".block" + std::to_string(b), st,
                    b == 1 ? st.stride : 1);
        }
    }
    w.head(num_classes);
    return w;
}

}  // namespace

std::vector<LayerShape> propagate(const ArchitectureConfig& arch, TensorShape input,
                                  int num_classes) {
    return walk(arch, input, num_classes).shapes;
}

ResourceEstimate estimate(const ArchitectureConfig& arch, TensorShape input, int num_classes) {
    ResourceEstimate est;
    est.layers = walk(arch, input, num_classes).costs;
    for (const auto& l : est.layers) {
        est.total_macs += l.macs;
        est.total_params += l.params;
        est.peak_sram_bytes = std::max(est.peak_sram_bytes, l.live_bytes());
    }
    est.flash_bytes = est.total_params;
    return est;
}

ResourceEstimate estimate(const ArchitectureConfig& arch, const SearchSpace& space) {
    return estimate(arch, {space.input_resolution, space.input_resolution, kInputChannels},
                    space.num_classes);
}

GateVerdict check_constraints(const ResourceEstimate& est, const ConstraintSet& limits) {
    GateVerdict verdict;
    if (est.total_macs < limits.macs_min)
        verdict.violations.push_back({GateViolation::Kind::MacsLow, est.total_macs,
                                      limits.macs_min, limits.macs_max});
    if (est.total_macs > limits.macs_max)
        verdict.violations.push_back({GateViolation::Kind::MacsHigh, est.total_macs,
                                      limits.macs_min, limits.macs_max});
    if (est.peak_sram_bytes > limits.sram_limit_bytes)
        verdict.violations.push_back({GateViolation::Kind::Sram, est.peak_sram_bytes, 0,
                                      limits.sram_limit_bytes});
    return verdict;
}

ordered_json estimate_to_json(const ResourceEstimate& est) {
    ordered_json j;
    j["total_macs"] = est.total_macs;
    j["total_params"] = est.total_params;
    j["peak_sram_bytes"] = est.peak_sram_bytes;
    j["flash_bytes"] = est.flash_bytes;
    auto layers = ordered_json::array();
    for (const auto& l : est.layers) {
        ordered_json lj;
        lj["label"] = l.label;
        lj["macs"] = l.macs;
        lj["params"] = l.params;
        lj["in_bytes"] = l.in_bytes;
        lj["out_bytes"] = l.out_bytes;
        lj["resident_extra_bytes"] = l.resident_extra_bytes;
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j;
}

ordered_json verdict_to_json(const GateVerdict& verdict) {
    ordered_json j;
    j["accepted"] = verdict.accepted();
    auto vs = ordered_json::array();
    for (const auto& v : verdict.violations) {
        ordered_json vj;
        vj["kind"] = to_string(v.kind);
        vj["current"] = v.current;
        vj["lower"] = v.lower;
        vj["upper"] = v.upper;
        vs.push_back(std::move(vj));
    }
    j["violations"] = std::move(vs);
    return j;
}

GateVerdict verdict_from_json(const json& doc) {
    GateVerdict verdict;
    for (const auto& vj : doc.at("violations")) {
        const auto kind = vj.at("kind").get<std::string>();
        GateViolation v{};
        if (kind == "macs_low") v.kind = GateViolation::Kind::MacsLow;
        else if (kind == "macs_high") v.kind = GateViolation::Kind::MacsHigh;
        else if (kind == "sram") v.kind = GateViolation::Kind::Sram;
        else throw std::invalid_argument("unknown gate violation kind: " + kind);
        v.current = vj.at("current").get<u64>();
        v.lower = vj.at("lower").get<u64>();
        v.upper = vj.at("upper").get<u64>();
        verdict.violations.push_back(v);
    }
    return verdict;
}

ordered_json constraints_to_json(const ConstraintSet& limits) {
    ordered_json j;
    j["macs_min"] = limits.macs_min;
    j["macs_max"] = limits.macs_max;
    j["sram_limit_bytes"] = limits.sram_limit_bytes;
    return j;
}

ConstraintSet constraints_from_json(const json& doc) {
    ConstraintSet limits;
    for (const auto& [key, val] : doc.items()) {
        if (key == "macs_min") limits.macs_min = val.get<u64>();
        else if (key == "macs_max") limits.macs_max = val.get<u64>();
        else if (key == "sram_limit_bytes") limits.sram_limit_bytes = val.get<u64>();
        else throw std::invalid_argument("unknown constraint key: " + key);
    }
    if (limits.macs_min > limits.macs_max)
        throw std::invalid_argument("macs_min must not exceed macs_max");
    return limits;
}

}  // namespace llmnas
