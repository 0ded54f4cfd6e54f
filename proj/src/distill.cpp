#include "llmnas/distill.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace llmnas::distill {

namespace {

void check_logits(std::span<const double> z) {
    if (z.size() < 2) throw std::invalid_argument("logit vector needs at least two classes");
    for (double v : z)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite logit");
}

void check_temperature(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("temperature must be > 0");
}

}  // namespace

std::vector<double> log_softened_probs(std::span<const double> logits, double temperature) {
    check_logits(logits);
    check_temperature(temperature);
    std::vector<double> scaled(logits.size());
    std::transform(logits.begin(), logits.end(), scaled.begin(),
                   [&](double v) { return v / temperature; });
    const double peak = *std::max_element(scaled.begin(), scaled.end());
    double sum = 0.0;
    for (double v : scaled) sum += std::exp(v - peak);
    const double log_norm = peak + std::log(sum);
    for (double& v : scaled) v -= log_norm;
    return scaled;
}

std::vector<double> softened_probs(std::span<const double> logits, double temperature) {
    check_logits(logits);
    check_temperature(temperature);
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((logits[i] - peak) / temperature);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double kd_loss(std::span<const double> teacher, std::span<const double> student,
               double temperature) {
    if (teacher.size() != student.size())
        throw std::invalid_argument("mismatched-length: teacher and student logits differ");
    const auto log_pt = log_softened_probs(teacher, temperature);
    const auto log_ps = log_softened_probs(student, temperature);
    double kl = 0.0;
    for (std::size_t i = 0; i < log_pt.size(); ++i) {
        const double pt = std::exp(log_pt[i]);
        if (pt == 0.0) continue;
        kl += pt * (log_pt[i] - log_ps[i]);
    }
    // Rounding can leave a tiny negative value for near-identical inputs.
    return temperature * temperature * std::max(kl, 0.0);
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw std::invalid_argument("label out of range");
    return -log_softened_probs(logits, 1.0)[static_cast<std::size_t>(label)];
}

double combined_loss(double ce, double kd, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
    if (!std::isfinite(ce) || !std::isfinite(kd)) throw std::invalid_argument("non-finite loss");
    return alpha * ce + (1.0 - alpha) * kd;
}

double alpha_step(double alpha, const AlphaSchedule& sched, int epoch) {
    if (sched.num_epochs < 1) throw std::invalid_argument("num_epochs must be >= 1");
    if (epoch < 1 || epoch > sched.num_epochs)
        throw std::out_of_range("epoch out of range for alpha schedule");
    const double t = static_cast<double>(epoch) / static_cast<double>(sched.num_epochs);
    // std::lerp is exact at t == 1.
    return std::lerp(alpha, sched.alpha_final, t);
}

std::vector<double> alpha_trajectory(const AlphaSchedule& sched) {
    if (!(sched.alpha0 >= 0.0 && sched.alpha0 <= 1.0 && sched.alpha_final >= 0.0 &&
          sched.alpha_final <= 1.0))
        throw std::invalid_argument("alpha values must be in [0, 1]");
    std::vector<double> out;
    double alpha = sched.alpha0;
    for (int e = 1; e <= sched.num_epochs; ++e) {
        alpha = alpha_step(alpha, sched, e);
        out.push_back(alpha);
    }
    return out;
}

nlohmann::ordered_json make_test_vectors(unsigned seed, int cases) {
    // Raw engine output mapped by hand so the vectors do not depend on the
    // standard library's distribution implementations.
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    };

    nlohmann::ordered_json doc;
    doc["description"] = "per-sample KD test vectors; natural-log KL, T^2 scaling";
    doc["tolerance"] = 1e-6;
    auto items = nlohmann::ordered_json::array();
    const double temperatures[] = {1.0, 2.0, 4.0, 10.0};
    const double alphas[] = {0.0, 0.4, 0.6, 0.8, 1.0};
    for (int c = 0; c < cases; ++c) {
        const int classes = 2 + static_cast<int>(rng() % 9);
        const double spread = (c % 3 == 0) ? 1.0 : (c % 3 == 1 ? 5.0 : 20.0);
        std::vector<double> zt(classes), zs(classes);
        for (auto& v : zt) v = uniform(-spread, spread);
        for (auto& v : zs) v = uniform(-spread, spread);
        const int label = static_cast<int>(rng() % static_cast<unsigned>(classes));
        const double t = temperatures[c % 4];
        const double alpha = alphas[c % 5];
        const double ce = cross_entropy(zs, label);
        const double kd = kd_loss(zt, zs, t);

        nlohmann::ordered_json item;
        item["teacher_logits"] = zt;
        item["student_logits"] = zs;
        item["label"] = label;
        item["temperature"] = t;
        item["alpha"] = alpha;
        item["teacher_probs"] = softened_probs(zt, t);
        item["student_probs"] = softened_probs(zs, t);
        item["ce"] = ce;
        item["kd"] = kd;
        item["combined"] = combined_loss(ce, kd, alpha);
        items.push_back(std::move(item));
    }
    doc["cases"] = std::move(items);

    const AlphaSchedule sched{};
    nlohmann::ordered_json alpha;
    alpha["alpha0"] = sched.alpha0;
    alpha["alpha_final"] = sched.alpha_final;
    alpha["num_epochs"] = sched.num_epochs;
    alpha["trajectory"] = alpha_trajectory(sched);
    doc["alpha_schedule"] = std::move(alpha);
    return doc;
}

}  // namespace llmnas::distill
