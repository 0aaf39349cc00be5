#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "constructa/eval.hpp"
#include "constructa/gateway.hpp"
#include "constructa/knowledge.hpp"
#include "constructa/prompts.hpp"

namespace constructa {

/// Floor and ceiling applied to probabilities before taking logs.
inline constexpr double kLogEpsilon = 1e-12;

struct LossWeights {
    double alpha = 0.5;  // context-rule term
    double beta = 1.0;   // preference term

    /// Throws UsageError "InvalidLossWeights".
    void check() const;
    bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
    double l_sft = 0.0;
    double l_cr = 0.0;
    double l_pa = 0.0;
    double l_total = 0.0;
    LossWeights weights;

    bool operator==(const LossBreakdown&) const = default;
};

/// -(1/N) sum y_i ln p_i. Throws UsageError "DomainError" when some p_i <= 0
/// (or > 1) carries y_i = 1, "InvalidInput" on empty or mismatched input.
double loss_sft(std::span<const double> probs, std::span<const double> labels);

/// Binary cross-entropy with p clamped to [eps, 1 - eps].
double loss_pa(std::span<const double> probs, std::span<const double> labels);

LossBreakdown loss_total(double l_sft, double l_cr, double l_pa, const LossWeights& weights);

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct EpochLog {
    std::size_t epoch = 0;  // 1-based, across both phases
    std::string phase;      // "sft" or "preference"
    LossBreakdown loss;     // at the weights the epoch started from
    double pairwise_accuracy = 0.0;

    bool operator==(const EpochLog&) const = default;
};

/// Logistic model over embedder features.
class PreferenceScorer {
public:
    PreferenceScorer() = default;
    PreferenceScorer(std::vector<double> weights, double bias) : weights_(std::move(weights)), bias_(bias) {}

    std::size_t dimension() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::vector<double>& weights() noexcept { return weights_; }
    double bias() const noexcept { return bias_; }
    double& bias() noexcept { return bias_; }
    std::vector<EpochLog>& training_log() noexcept { return log_; }
    const std::vector<EpochLog>& training_log() const noexcept { return log_; }

    /// Throws UsageError "DimensionMismatch".
    double logit(const EmbeddingVector& x) const;
    double probability(const EmbeddingVector& x) const { return sigmoid(logit(x)); }
    double score(const Embedder& embedder, std::string_view prompt, std::string_view completion) const;

    /// Binary: "CSCR", u32 version, u32 8, u64 D, f64 bias, D x f64 weights (LE).
    void save(const std::filesystem::path& path) const;
    /// Throws DataError "CorruptScorer" / "MissingFile".
    static PreferenceScorer load(const std::filesystem::path& path);

    bool operator==(const PreferenceScorer&) const = default;

private:
    std::vector<double> weights_;
    double bias_ = 0.0;
    std::vector<EpochLog> log_;
};

/// Text the scorer sees for one completion.
std::string scorer_input(std::string_view prompt, std::string_view completion);

struct TrainingExample {
    EmbeddingVector features;         // embed(prompt + completion)
    EmbeddingVector prompt_features;  // embed(prompt)
    double label = 0.0;               // 1 chosen, 0 rejected
    std::optional<double> rule_applicable;
    std::size_t pair = 0;             // index of the source record
};

/// Two examples per record: chosen (1) then rejected (0).
std::vector<TrainingExample> make_training_set(const std::vector<PreferenceRecord>& records,
                                               const Embedder& embedder);

/// Pluggable context-rule term: value and gradient w.r.t. the scorer.
class ContextRuleLoss {
public:
    virtual ~ContextRuleLoss() = default;
    virtual std::string name() const = 0;
    /// Adds d/dw and d/db into the given accumulators (already sized).
    virtual double value_and_gradient(const std::vector<TrainingExample>& examples, const PreferenceScorer& scorer,
                                      std::vector<double>& grad_w, double& grad_b) const = 0;
};

/// Contributes nothing.
class ZeroRuleLoss final : public ContextRuleLoss {
public:
    std::string name() const override { return "zero"; }
    double value_and_gradient(const std::vector<TrainingExample>&, const PreferenceScorer&, std::vector<double>&,
                              double&) const override {
        return 0.0;
    }
};

/// Cross-entropy of the scorer on prompt-only features against the
/// `rule_applicable` meta label, over examples that carry one.
class RuleApplicabilityLoss final : public ContextRuleLoss {
public:
    std::string name() const override { return "rule_applicability"; }
    double value_and_gradient(const std::vector<TrainingExample>& examples, const PreferenceScorer& scorer,
                              std::vector<double>& grad_w, double& grad_b) const override;
};

std::unique_ptr<ContextRuleLoss> make_rule_loss(std::string_view name);

/// loss_sft over label-1 examples, with its gradient added into the accumulators.
double loss_sft_and_gradient(const PreferenceScorer& scorer, const std::vector<TrainingExample>& examples,
                             std::vector<double>& grad_w, double& grad_b);
/// loss_pa over all examples, with its gradient added into the accumulators.
double loss_pa_and_gradient(const PreferenceScorer& scorer, const std::vector<TrainingExample>& examples,
                            std::vector<double>& grad_w, double& grad_b);

/// Share of pairs whose chosen example outscores the rejected one.
double pairwise_accuracy(const PreferenceScorer& scorer, const std::vector<TrainingExample>& examples);

struct TrainConfig {
    LossWeights weights;
    std::size_t epochs_sft = 10;
    std::size_t epochs = 10;  // preference phase
    double learning_rate = 0.5;
    std::uint64_t seed = 42;
    double init_scale = 0.01;

    /// Throws UsageError "InvalidTrainConfig".
    void check() const;
};

/// Full-batch gradient descent: SFT phase on chosen examples, then L_total.
/// Throws DataError "DegenerateData" unless both labels are present and there
/// are at least two examples.
PreferenceScorer train_scorer(const std::vector<TrainingExample>& examples, const TrainConfig& config,
                              const ContextRuleLoss& rule_loss = ZeroRuleLoss{});
PreferenceScorer train_scorer(const std::vector<PreferenceRecord>& records, const Embedder& embedder,
                              const TrainConfig& config, const ContextRuleLoss& rule_loss = ZeroRuleLoss{});

std::string training_log_to_records(const std::vector<EpochLog>& log);

/// Token-length samples per source task, raw and polished, in arrival order.
struct ContextLengthStats {
    std::map<TaskKind, std::vector<std::size_t>> raw;
    std::map<TaskKind, std::vector<std::size_t>> polished;

    void add(TaskKind kind, std::size_t raw_tokens, std::size_t polished_tokens);
    std::size_t count(TaskKind kind) const;
    double mean(TaskKind kind, bool polished_side) const;
    double median(TaskKind kind, bool polished_side) const;

    /// Per-task means, medians and counts.
    std::string to_json() const;
    /// `<bin start> <count>` lines; empty bins between populated ones included.
    std::string histogram_text(TaskKind kind, bool polished_side, std::size_t bin_width = 50) const;

    bool operator==(const ContextLengthStats&) const = default;
};

struct PolishItem {
    TaskKind source = TaskKind::MVP;
    PromptSections sections;
    std::string transcript_id;
};

struct PolishResult {
    std::string polished_text;
    std::size_t raw_tokens = 0;
    std::size_t polished_tokens = 0;
};

/// Sends the polishing prompt around `raw` and records both lengths.
PolishResult polish_context(Gateway& gateway, TaskKind source, const PromptSections& raw,
                            ContextLengthStats& stats, CallTag tag = {});

/// Polishes items in parallel (gateway-limited); stats and results follow
/// input order. Throws GatewayError after all started calls finish.
std::vector<PolishResult> polish_batch(Gateway& gateway, const std::vector<PolishItem>& items,
                                       ContextLengthStats& stats);

}  // namespace constructa
