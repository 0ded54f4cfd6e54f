#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

// Logit-level knowledge-distillation kernels: temperature softmax, T^2-scaled
// KL distillation loss, the CE/KD mixture and the per-epoch alpha recurrence.
namespace llmnas::distill {

struct AlphaSchedule {
    double alpha0 = 0.4;
    double alpha_final = 0.8;
    int num_epochs = 50;
};

// softmax(z / T), max-subtracted. Throws std::invalid_argument for T <= 0,
// fewer than two logits or non-finite input.
std::vector<double> softened_probs(std::span<const double> logits, double temperature);

// log softmax(z / T).
std::vector<double> log_softened_probs(std::span<const double> logits, double temperature);

// T^2 * KL(p_t || p_s), natural log; classes with p_t == 0 contribute 0.
double kd_loss(std::span<const double> teacher, std::span<const double> student,
               double temperature);

// -log softmax(z)[label].
double cross_entropy(std::span<const double> logits, int label);

// alpha * ce + (1 - alpha) * kd.
double combined_loss(double ce, double kd, double alpha);

// alpha + (alpha_final - alpha) * epoch / num_epochs for 1 <= epoch <= num_epochs;
// lands exactly on alpha_final at the last epoch.
double alpha_step(double alpha, const AlphaSchedule& sched, int epoch);

// Values after each epoch 1..num_epochs, starting from alpha0.
std::vector<double> alpha_trajectory(const AlphaSchedule& sched);

// Shared test vectors for the training-side implementation: deterministic
// random logits with expected probabilities and losses.
nlohmann::ordered_json make_test_vectors(unsigned seed = 20250101, int cases = 24);

}  // namespace llmnas::distill
