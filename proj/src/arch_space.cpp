#include "llmnas/arch_space.hpp"

#include <algorithm>
#include <sstream>

#include "llmnas/digest.hpp"

namespace llmnas {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ConvBlock block) {
    switch (block) {
    case ConvBlock::DWSepConv: return "dwsepconv";
    case ConvBlock::MBConv: return "mbconv";
    }
    return "?";
}

std::string_view to_string(Activation act) {
    switch (act) {
    case Activation::ReLU6: return "relu6";
    case Activation::LeakyReLU: return "leakyrelu";
    case Activation::Swish: return "swish";
    }
    return "?";
}

std::string_view to_string(CandidateSource source) {
    switch (source) {
    case CandidateSource::Llm: return "llm";
    case CandidateSource::Replay: return "replay";
    case CandidateSource::Manual: return "manual";
    }
    return "?";
}

std::optional<ConvBlock> conv_block_from_string(std::string_view name) {
    // "dwconv" is the name the choice table uses for the same block.
    if (name == "dwsepconv" || name == "dwconv") return ConvBlock::DWSepConv;
    if (name == "mbconv") return ConvBlock::MBConv;
    return std::nullopt;
}

std::optional<Activation> activation_from_string(std::string_view name) {
    if (name == "relu6") return Activation::ReLU6;
    if (name == "leakyrelu") return Activation::LeakyReLU;
    if (name == "swish") return Activation::Swish;
    return std::nullopt;
}

std::optional<CandidateSource> candidate_source_from_string(std::string_view name) {
    if (name == "llm") return CandidateSource::Llm;
    if (name == "replay") return CandidateSource::Replay;
    if (name == "manual") return CandidateSource::Manual;
    return std::nullopt;
}

std::string_view to_string(ParseError::Kind kind) {
    switch (kind) {
    case ParseError::Kind::Malformed: return "malformed-document";
    case ParseError::Kind::Schema: return "schema-violation";
    case ParseError::Kind::Space: return "space-violation";
    }
    return "?";
}

namespace {

std::string join_details(ParseError::Kind kind, const std::vector<std::string>& details) {
    std::string msg{to_string(kind)};
    for (const auto& d : details) {
        msg += "; ";
        msg += d;
    }
    return msg;
}

std::string value_text(int v) { return std::to_string(v); }
std::string value_text(double v) { return json(v).dump(); }
std::string value_text(bool v) { return v ? "true" : "false"; }
std::string value_text(ConvBlock v) { return std::string(to_string(v)); }
std::string value_text(Activation v) { return std::string(to_string(v)); }

template <typename T>
std::string set_text(const std::vector<T>& choices) {
    std::string out = "{";
    for (std::size_t i = 0; i < choices.size(); ++i) {
        if (i) out += ", ";
        out += value_text(static_cast<T>(choices[i]));
    }
    out += "}";
    return out;
}

template <typename T>
bool contains(const std::vector<T>& choices, const T& v) {
    return std::find(choices.begin(), choices.end(), v) != choices.end();
}

template <typename T>
void check_field(std::vector<Violation>& out, const char* field, const T& value,
                 const std::vector<T>& choices) {
    if (!contains(choices, value)) {
        out.push_back({Violation::Kind::Field, std::nullopt, field, value_text(value),
                       set_text(choices)});
    }
}

template <typename T>
void require_list(const std::vector<T>& list, const char* name) {
    if (list.empty()) throw std::invalid_argument(std::string("empty choice list: ") + name);
    for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = i + 1; j < list.size(); ++j)
            if (list[i] == list[j])
                throw std::invalid_argument(std::string("duplicate choice in ") + name);
}

}  // namespace

ParseError::ParseError(Kind kind, std::vector<std::string> details)
    : std::runtime_error(join_details(kind, details)), kind_(kind), details_(std::move(details)) {}

std::string Violation::describe() const {
    std::ostringstream os;
    if (stage) os << "stage " << *stage << ": ";
    switch (kind) {
    case Kind::StageCount:
        os << "stage_count got=" << value << " want=" << allowed;
        break;
    case Kind::Missing:
        os << field << " is required when se is true, allowed " << allowed;
        break;
    case Kind::Field:
        os << field << "=" << value << " not in " << allowed;
        break;
    }
    return os.str();
}

void check_search_space(const SearchSpace& space) {
    if (space.stage_count < 1) throw std::invalid_argument("stage_count must be positive");
    if (space.input_resolution < 1) throw std::invalid_argument("input_resolution must be positive");
    if (space.num_classes < 1) throw std::invalid_argument("num_classes must be positive");
    require_list(space.out_channel_choices, "out_channels");
    require_list(space.kernel_choices, "kernel");
    require_list(space.stride_choices, "stride");
    require_list(space.expansion_choices, "expansion");
    require_list(space.se_enable_choices, "se");
    require_list(space.se_ratio_choices, "se_ratio");
    require_list(space.conv_block_choices, "conv_block");
    require_list(space.skip_choices, "skip");
    require_list(space.activation_choices, "activation");
    require_list(space.layers_choices, "layers");
    auto positive = [](const std::vector<int>& v) {
        return std::all_of(v.begin(), v.end(), [](int x) { return x > 0; });
    };
    if (!positive(space.out_channel_choices) || !positive(space.expansion_choices) ||
        !positive(space.layers_choices))
        throw std::invalid_argument("channel, expansion and layer choices must be positive");
    for (int k : space.kernel_choices)
        if (k < 1 || k % 2 == 0) throw std::invalid_argument("kernel choices must be odd positive");
    for (int s : space.stride_choices)
        if (s != 1 && s != 2) throw std::invalid_argument("stride choices must be 1 or 2");
    for (double r : space.se_ratio_choices)
        if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("se_ratio choices must be in (0,1]");
}

ValidationVerdict validate_stage(const StageConfig& stage, const SearchSpace& space) {
    ValidationVerdict verdict;
    auto& v = verdict.violations;
    check_field(v, "out_channels", stage.out_channels, space.out_channel_choices);
    check_field(v, "kernel", stage.kernel, space.kernel_choices);
    check_field(v, "stride", stage.stride, space.stride_choices);
    check_field(v, "expansion", stage.expansion, space.expansion_choices);
    check_field(v, "se", stage.se, space.se_enable_choices);
    if (stage.se_ratio) {
        check_field(v, "se_ratio", *stage.se_ratio, space.se_ratio_choices);
    } else if (stage.se) {
        v.push_back({Violation::Kind::Missing, std::nullopt, "se_ratio", "missing",
                     set_text(space.se_ratio_choices)});
    }
    check_field(v, "conv_block", stage.conv_block, space.conv_block_choices);
    check_field(v, "skip", stage.skip, space.skip_choices);
    check_field(v, "activation", stage.activation, space.activation_choices);
    check_field(v, "layers", stage.layers, space.layers_choices);
    return verdict;
}

ValidationVerdict validate_architecture(const ArchitectureConfig& arch, const SearchSpace& space) {
    ValidationVerdict verdict;
    const int got = static_cast<int>(arch.stages.size());
    if (got != space.stage_count) {
        verdict.violations.push_back({Violation::Kind::StageCount, std::nullopt, "stages",
                                      std::to_string(got), std::to_string(space.stage_count)});
    }
    for (std::size_t i = 0; i < arch.stages.size(); ++i) {
        for (auto viol : validate_stage(arch.stages[i], space).violations) {
            viol.stage = static_cast<int>(i) + 1;
            verdict.violations.push_back(std::move(viol));
        }
    }
    return verdict;
}

std::uint64_t count_stage_configs(const SearchSpace& space) {
    std::uint64_t n = 1;
    for (std::size_t size :
         {space.kernel_choices.size(), space.stride_choices.size(), space.se_enable_choices.size(),
          space.conv_block_choices.size(), space.skip_choices.size(),
          space.expansion_choices.size(), space.activation_choices.size(),
          space.layers_choices.size(), space.out_channel_choices.size()})
        n *= size;
    return n;
}

ordered_json stage_to_json(const StageConfig& s) {
    ordered_json j;
    j["out_channels"] = s.out_channels;
    j["kernel"] = s.kernel;
    j["stride"] = s.stride;
    j["expansion"] = s.expansion;
    j["se"] = s.se;
    if (s.se_ratio) j["se_ratio"] = *s.se_ratio;
    j["conv_block"] = to_string(s.conv_block);
    j["skip"] = s.skip;
    j["activation"] = to_string(s.activation);
    j["layers"] = s.layers;
    return j;
}

ordered_json architecture_to_json(const ArchitectureConfig& arch, bool include_identity) {
    ordered_json j;
    if (include_identity) {
        j["candidate_id"] = arch.candidate_id;
        j["source"] = to_string(arch.source);
    }
    auto stages = ordered_json::array();
    for (const auto& s : arch.stages) stages.push_back(stage_to_json(s));
    j["stages"] = std::move(stages);
    return j;
}

std::string canonical_serialization(const ArchitectureConfig& arch) {
    return architecture_to_json(arch, false).dump();
}

std::string canonical_hash(const ArchitectureConfig& arch) {
    return sha256_hex(canonical_serialization(arch));
}

namespace {

struct StageReader {
    const json& obj;
    std::string path;
    std::vector<std::string>& schema;

    const json* get(const char* key, bool required = true) const {
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) schema.push_back(path + "." + key + ": missing");
            return nullptr;
        }
        return &*it;
    }

    std::optional<int> integer(const char* key) const {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            schema.push_back(path + "." + key + ": expected integer");
            return std::nullopt;
        }
        auto raw = v->get<std::int64_t>();
        if (v->is_number_unsigned() && v->get<std::uint64_t>() > 1'000'000'000ULL) raw = -1;
        if (raw < -1'000'000'000 || raw > 1'000'000'000) {
            schema.push_back(path + "." + key + ": integer out of range");
            return std::nullopt;
        }
        return static_cast<int>(raw);
    }

    std::optional<bool> boolean(const char* key) const {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            schema.push_back(path + "." + key + ": expected boolean");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::string> string(const char* key) const {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            schema.push_back(path + "." + key + ": expected string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }
};

constexpr const char* kStageKeys[] = {"out_channels", "kernel", "stride",     "expansion",
                                      "se",           "se_ratio", "conv_block", "skip",
                                      "activation",   "layers"};

template <typename E>
std::string enum_names(const std::vector<E>& choices) {
    return set_text(choices);
}

}  // namespace

ArchitectureConfig parse_architecture(const json& doc, const SearchSpace& space) {
    std::vector<std::string> schema;
    std::vector<Violation> space_violations;
    ArchitectureConfig arch;
    arch.source = CandidateSource::Llm;

    if (!doc.is_object()) throw ParseError(ParseError::Kind::Schema, {"$: expected object"});
    for (const auto& [key, _] : doc.items()) {
        if (key != "stages" && key != "candidate_id" && key != "source")
            schema.push_back("$." + key + ": unknown key");
    }
    if (auto it = doc.find("candidate_id"); it != doc.end()) {
        if (it->is_string()) arch.candidate_id = it->get<std::string>();
        else schema.push_back("$.candidate_id: expected string");
    }
    if (auto it = doc.find("source"); it != doc.end()) {
        std::optional<CandidateSource> src;
        if (it->is_string()) src = candidate_source_from_string(it->get<std::string>());
        if (src) arch.source = *src;
        else schema.push_back("$.source: expected one of llm, replay, manual");
    }

    auto stages_it = doc.find("stages");
    if (stages_it == doc.end()) {
        schema.push_back("$.stages: missing");
    } else if (!stages_it->is_array()) {
        schema.push_back("$.stages: expected array");
    } else {
        for (std::size_t i = 0; i < stages_it->size(); ++i) {
            const json& sj = (*stages_it)[i];
            const std::string path = "$.stages[" + std::to_string(i) + "]";
            if (!sj.is_object()) {
                schema.push_back(path + ": expected object");
                continue;
            }
            for (const auto& [key, _] : sj.items()) {
                if (std::find_if(std::begin(kStageKeys), std::end(kStageKeys),
                                 [&](const char* k) { return key == k; }) == std::end(kStageKeys))
                    schema.push_back(path + "." + key + ": unknown key");
            }
            StageReader r{sj, path, schema};
            StageConfig st;
            if (auto v = r.integer("out_channels")) st.out_channels = *v;
            if (auto v = r.integer("kernel")) st.kernel = *v;
            if (auto v = r.integer("stride")) st.stride = *v;
            if (auto v = r.integer("expansion")) st.expansion = *v;
            if (auto v = r.boolean("se")) st.se = *v;
            if (const json* v = r.get("se_ratio", false)) {
                if (v->is_number()) st.se_ratio = v->get<double>();
                else if (!v->is_null()) schema.push_back(path + ".se_ratio: expected number");
            }
            if (auto v = r.string("conv_block")) {
                if (auto e = conv_block_from_string(*v)) st.conv_block = *e;
                else
                    space_violations.push_back({Violation::Kind::Field, static_cast<int>(i) + 1,
                                                "conv_block", *v,
                                                enum_names(space.conv_block_choices)});
            }
            if (auto v = r.boolean("skip")) st.skip = *v;
            if (auto v = r.string("activation")) {
                if (auto e = activation_from_string(*v)) st.activation = *e;
                else
                    space_violations.push_back({Violation::Kind::Field, static_cast<int>(i) + 1,
                                                "activation", *v,
                                                enum_names(space.activation_choices)});
            }
            if (auto v = r.integer("layers")) st.layers = *v;
            arch.stages.push_back(st);
        }
    }

    if (!schema.empty()) throw ParseError(ParseError::Kind::Schema, std::move(schema));

    auto verdict = validate_architecture(arch, space);
    for (auto& v : verdict.violations) space_violations.push_back(std::move(v));
    if (!space_violations.empty()) {
        std::vector<std::string> details;
        details.reserve(space_violations.size());
        for (const auto& v : space_violations) details.push_back(v.describe());
        throw ParseError(ParseError::Kind::Space, std::move(details));
    }
    return arch;
}

ArchitectureConfig parse_architecture(std::string_view text, const SearchSpace& space) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ParseError(ParseError::Kind::Malformed, {"not valid JSON"});
    return parse_architecture(doc, space);
}

ordered_json search_space_to_json(const SearchSpace& space) {
    ordered_json j;
    j["stage_count"] = space.stage_count;
    j["out_channels"] = space.out_channel_choices;
    j["kernel"] = space.kernel_choices;
    j["stride"] = space.stride_choices;
    j["expansion"] = space.expansion_choices;
    auto bools = [](const std::vector<bool>& v) {
        auto a = ordered_json::array();
        for (bool b : v) a.push_back(b);
        return a;
    };
    j["se"] = bools(space.se_enable_choices);
    j["se_ratio"] = space.se_ratio_choices;
    auto convs = ordered_json::array();
    for (auto c : space.conv_block_choices) convs.push_back(to_string(c));
    j["conv_block"] = convs;
    j["skip"] = bools(space.skip_choices);
    auto acts = ordered_json::array();
    for (auto a : space.activation_choices) acts.push_back(to_string(a));
    j["activation"] = acts;
    j["layers"] = space.layers_choices;
    j["input_resolution"] = space.input_resolution;
    j["num_classes"] = space.num_classes;
    return j;
}

std::string search_space_document(const SearchSpace& space) {
    return search_space_to_json(space).dump();
}

SearchSpace search_space_from_json(const json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("search space document must be an object");
    SearchSpace space;
    auto read_bools = [](const json& a) {
        std::vector<bool> out;
        for (const auto& b : a) out.push_back(b.get<bool>());
        return out;
    };
    try {
        for (const auto& [key, val] : doc.items()) {
            if (key == "stage_count") space.stage_count = val.get<int>();
            else if (key == "out_channels") space.out_channel_choices = val.get<std::vector<int>>();
            else if (key == "kernel") space.kernel_choices = val.get<std::vector<int>>();
            else if (key == "stride") space.stride_choices = val.get<std::vector<int>>();
            else if (key == "expansion") space.expansion_choices = val.get<std::vector<int>>();
            else if (key == "se") space.se_enable_choices = read_bools(val);
            else if (key == "se_ratio") space.se_ratio_choices = val.get<std::vector<double>>();
            else if (key == "conv_block") {
                space.conv_block_choices.clear();
                for (const auto& n : val) {
                    auto c = conv_block_from_string(n.get<std::string>());
                    if (!c) throw std::invalid_argument("unknown conv_block " + n.dump());
                    space.conv_block_choices.push_back(*c);
                }
            } else if (key == "skip") space.skip_choices = read_bools(val);
            else if (key == "activation") {
                space.activation_choices.clear();
                for (const auto& n : val) {
                    auto a = activation_from_string(n.get<std::string>());
                    if (!a) throw std::invalid_argument("unknown activation " + n.dump());
                    space.activation_choices.push_back(*a);
                }
            } else if (key == "layers") space.layers_choices = val.get<std::vector<int>>();
            else if (key == "input_resolution") space.input_resolution = val.get<int>();
            else if (key == "num_classes") space.num_classes = val.get<int>();
            else throw std::invalid_argument("unknown search space key: " + key);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("search space document: ") + e.what());
    }
    check_search_space(space);
    return space;
}

}  // namespace llmnas
