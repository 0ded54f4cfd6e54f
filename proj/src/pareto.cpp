#include "llmnas/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace llmnas {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Phase phase) {
    switch (phase) {
    case Phase::Mini: return "mini";
    case Phase::Full: return "full";
    case Phase::Kd: return "kd";
    }
    return "?";
}

std::string_view to_string(RecordStatus status) {
    switch (status) {
    case RecordStatus::Evaluated: return "evaluated";
    case RecordStatus::RejectedGate: return "rejected_gate";
    case RecordStatus::Duplicate: return "duplicate";
    }
    return "?";
}

std::optional<Phase> phase_from_string(std::string_view name) {
    if (name == "mini") return Phase::Mini;
    if (name == "full") return Phase::Full;
    if (name == "kd") return Phase::Kd;
    return std::nullopt;
}

double round_accuracy(double percent) { return std::round(percent * 100.0) / 100.0; }

bool dominates(const CandidateRecord& a, const CandidateRecord& b) {
    const bool no_worse = a.accuracy >= b.accuracy && a.macs <= b.macs && a.params <= b.params;
    const bool strictly = a.accuracy > b.accuracy || a.macs < b.macs || a.params < b.params;
    return no_worse && strictly;
}

bool ParetoFront::observe_best(const CandidateRecord& rec) {
    if (!best_ || rec.accuracy > best_->accuracy) {
        best_ = rec;
        return true;
    }
    return false;
}

FrontDelta ParetoFront::update(const CandidateRecord& rec) {
    if (rec.status != RecordStatus::Evaluated)
        throw std::invalid_argument("update_front: record status must be evaluated");
    if (!(rec.accuracy >= 0.0 && rec.accuracy <= 100.0))
        throw std::invalid_argument("update_front: accuracy outside [0, 100]");

    FrontDelta delta;
    delta.best_updated = observe_best(rec);

    for (const auto& m : members_) {
        const bool same_metrics =
            m.accuracy == rec.accuracy && m.macs == rec.macs && m.params == rec.params;
        if ((same_metrics && m.arch_hash == rec.arch_hash) || dominates(m, rec)) return delta;
    }

    auto dominated = [&](const CandidateRecord& m) { return dominates(rec, m); };
    for (const auto& m : members_)
        if (dominated(m)) delta.removed.push_back(m);
    std::erase_if(members_, dominated);
    members_.push_back(rec);
    delta.added = true;
    return delta;
}

std::pair<ParetoFront, FrontDelta> update_front(const ParetoFront& front,
                                                const CandidateRecord& rec) {
    ParetoFront next = front;
    FrontDelta delta = next.update(rec);
    return {std::move(next), std::move(delta)};
}

FrontStatistics statistics(const ParetoFront& front) {
    const auto& ms = front.members();
    if (ms.empty()) throw EmptyFront();

    auto summarize = [&](auto metric) {
        MetricSummary s{metric(ms.front()), metric(ms.front()), 0.0};
        double sum = 0.0;
        for (const auto& m : ms) {
            const double v = metric(m);
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
            sum += v;
        }
        s.mean = sum / static_cast<double>(ms.size());
        return s;
    };

    FrontStatistics st;
    st.count = ms.size();
    st.accuracy = summarize([](const CandidateRecord& r) { return r.accuracy; });
    st.macs = summarize([](const CandidateRecord& r) { return static_cast<double>(r.macs); });
    st.params = summarize([](const CandidateRecord& r) { return static_cast<double>(r.params); });
    return st;
}

std::string format_summary(const MetricSummary& m, double scale, int decimals) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "[%.*f, %.*f] %.*f", decimals, m.min / scale, decimals,
                  m.max / scale, decimals, m.mean / scale);
    return buf;
}

ordered_json record_to_json(const CandidateRecord& rec) {
    ordered_json j;
    j["candidate_id"] = rec.candidate_id;
    j["arch_hash"] = rec.arch_hash;
    j["accuracy"] = rec.accuracy;
    j["macs"] = rec.macs;
    j["params"] = rec.params;
    j["peak_sram_bytes"] = rec.peak_sram_bytes;
    j["phase"] = to_string(rec.phase);
    j["iteration"] = rec.iteration;
    j["status"] = to_string(rec.status);
    return j;
}

CandidateRecord record_from_json(const json& doc) {
    CandidateRecord rec;
    rec.candidate_id = doc.at("candidate_id").get<std::string>();
    rec.arch_hash = doc.at("arch_hash").get<std::string>();
    rec.accuracy = doc.at("accuracy").get<double>();
    rec.macs = doc.at("macs").get<std::uint64_t>();
    rec.params = doc.at("params").get<std::uint64_t>();
    rec.peak_sram_bytes = doc.at("peak_sram_bytes").get<std::uint64_t>();
    auto phase = phase_from_string(doc.at("phase").get<std::string>());
    if (!phase) throw std::invalid_argument("unknown phase in record");
    rec.phase = *phase;
    rec.iteration = doc.at("iteration").get<int>();
    const auto status = doc.at("status").get<std::string>();
    if (status == "evaluated") rec.status = RecordStatus::Evaluated;
    else if (status == "rejected_gate") rec.status = RecordStatus::RejectedGate;
    else if (status == "duplicate") rec.status = RecordStatus::Duplicate;
    else throw std::invalid_argument("unknown record status: " + status);
    return rec;
}

ordered_json statistics_to_json(const FrontStatistics& stats) {
    auto summary = [](const MetricSummary& m) {
        ordered_json j;
        j["min"] = m.min;
        j["max"] = m.max;
        j["mean"] = m.mean;
        return j;
    };
    ordered_json j;
    j["count"] = stats.count;
    j["accuracy"] = summary(stats.accuracy);
    j["macs"] = summary(stats.macs);
    j["params"] = summary(stats.params);
    return j;
}

ordered_json front_to_json(const ParetoFront& front) {
    ordered_json j;
    auto members = ordered_json::array();
    for (const auto& m : front.members()) members.push_back(record_to_json(m));
    j["members"] = std::move(members);
    j["best_accuracy"] = front.best_accuracy() ? record_to_json(*front.best_accuracy())
                                               : ordered_json(nullptr);
    j["statistics"] = front.empty() ? ordered_json(nullptr) : statistics_to_json(statistics(front));
    return j;
}

}  // namespace llmnas
