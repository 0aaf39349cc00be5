#include "constructa/alignment.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "constructa/util.hpp"
#include "json.hpp"

namespace constructa {

using nlohmann::ordered_json;

void LossWeights::check() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0 || beta < 0)
        throw UsageError("InvalidLossWeights", "alpha and beta must be finite and >= 0");
}

namespace {

void check_pairs(std::span<const double> probs, std::span<const double> labels) {
    if (probs.empty()) throw UsageError("InvalidInput", "loss needs at least one example");
    if (probs.size() != labels.size())
        throw UsageError("InvalidInput", "probs and labels differ in length (" + std::to_string(probs.size()) +
                                             " vs " + std::to_string(labels.size()) + ")");
}

double clamp_p(double p) { return std::clamp(p, kLogEpsilon, 1.0 - kLogEpsilon); }

}  // namespace

double loss_sft(std::span<const double> probs, std::span<const double> labels) {
    check_pairs(probs, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] == 0.0) continue;
        if (!(probs[i] > 0.0 && probs[i] <= 1.0))
            throw UsageError("DomainError", "probability " + std::to_string(probs[i]) + " at index " +
                                                std::to_string(i) + " is outside (0, 1]");
        sum += labels[i] * std::log(probs[i]);
    }
    return -sum / static_cast<double>(probs.size());
}

double loss_pa(std::span<const double> probs, std::span<const double> labels) {
    check_pairs(probs, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = clamp_p(probs[i]);
        sum += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(probs.size());
}

LossBreakdown loss_total(double l_sft, double l_cr, double l_pa, const LossWeights& weights) {
    LossBreakdown b;
    b.l_sft = l_sft;
    b.l_cr = l_cr;
    b.l_pa = l_pa;
    b.weights = weights;
    b.l_total = l_sft + weights.alpha * l_cr + weights.beta * l_pa;
    return b;
}

// ---- scorer ---------------------------------------------------------------------

double PreferenceScorer::logit(const EmbeddingVector& x) const {
    if (x.dimension() != weights_.size())
        throw UsageError("DimensionMismatch", "scorer has dimension " + std::to_string(weights_.size()) +
                                                  ", features have " + std::to_string(x.dimension()));
    const auto& v = x.values();
    return std::inner_product(v.begin(), v.end(), weights_.begin(), bias_);
}

double PreferenceScorer::score(const Embedder& embedder, std::string_view prompt, std::string_view completion) const {
    return probability(embedder.embed(scorer_input(prompt, completion)));
}

namespace {

constexpr char kScorerMagic[4] = {'C', 'S', 'C', 'R'};
constexpr std::uint32_t kScorerVersion = 1;

}  // namespace

void PreferenceScorer::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("WriteFailed", "cannot write " + path.string());
    const std::uint32_t version = kScorerVersion, width = sizeof(double);
    const std::uint64_t dim = weights_.size();
    out.write(kScorerMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&width), 4);
    out.write(reinterpret_cast<const char*>(&dim), 8);
    out.write(reinterpret_cast<const char*>(&bias_), 8);
    out.write(reinterpret_cast<const char*>(weights_.data()), static_cast<std::streamsize>(dim * sizeof(double)));
}

PreferenceScorer PreferenceScorer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot read scorer " + path.string());
    char magic[4];
    std::uint32_t version = 0, width = 0;
    std::uint64_t dim = 0;
    double bias = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&width), 4);
    in.read(reinterpret_cast<char*>(&dim), 8);
    in.read(reinterpret_cast<char*>(&bias), 8);
    if (!in || std::memcmp(magic, kScorerMagic, 4) != 0 || version != kScorerVersion || width != sizeof(double) ||
        dim > (1u << 24))
        throw DataError("CorruptScorer", path.string() + ": bad header");
    std::vector<double> w(dim);
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in || in.peek() != std::char_traits<char>::eof())
        throw DataError("CorruptScorer", path.string() + ": truncated or trailing data");
    return PreferenceScorer(std::move(w), bias);
}

std::string scorer_input(std::string_view prompt, std::string_view completion) {
    return std::string(prompt) + "\n" + std::string(completion);
}

std::vector<TrainingExample> make_training_set(const std::vector<PreferenceRecord>& records,
                                               const Embedder& embedder) {
    std::vector<TrainingExample> out;
    out.reserve(records.size() * 2);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::optional<double> rule;
        if (const auto it = r.meta.find("rule_applicable"); it != r.meta.end())
            rule = (it->second == "1" || it->second == "true") ? 1.0 : 0.0;
        const auto prompt_x = embedder.embed(r.prompt_text);
        out.push_back({embedder.embed(scorer_input(r.prompt_text, r.chosen_text)), prompt_x, 1.0, rule, i});
        out.push_back({embedder.embed(scorer_input(r.prompt_text, r.rejected_text)), prompt_x, 0.0, rule, i});
    }
    return out;
}

// ---- losses with gradients --------------------------------------------------------

namespace {

void axpy(std::vector<double>& acc, double a, const EmbeddingVector& x) {
    const auto& v = x.values();
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += a * v[j];
}

// Mean cross-entropy of sigmoid(w.x + b) against labels over the selected
// examples; derivative of a clamped term is zero.
template <typename Features, typename Label>
double bce_and_gradient(const PreferenceScorer& scorer, const std::vector<const TrainingExample*>& sel,
                        Features features, Label label, bool positives_only, std::vector<double>& grad_w,
                        double& grad_b) {
    if (sel.empty()) return 0.0;
    const double n = static_cast<double>(sel.size());
    double sum = 0.0;
    for (const auto* e : sel) {
        const auto& x = features(*e);
        const double y = label(*e);
        const double p = scorer.probability(x);
        const double pc = clamp_p(p);
        const bool clamped = pc != p;
        sum += positives_only ? y * std::log(pc) : y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
        if (clamped) continue;
        // d/dz of -[y ln p + (1-y) ln(1-p)] is p - y; of -y ln p it is -y (1 - p).
        const double dz = positives_only ? -y * (1.0 - p) : p - y;
        axpy(grad_w, dz / n, x);
        grad_b += dz / n;
    }
    return -sum / n;
}

}  // namespace

double loss_sft_and_gradient(const PreferenceScorer& scorer, const std::vector<TrainingExample>& examples,
                             std::vector<double>& grad_w, double& grad_b) {
    std::vector<const TrainingExample*> sel;
    for (const auto& e : examples)
        if (e.label == 1.0) sel.push_back(&e);
    return bce_and_gradient(
        scorer, sel, [](const TrainingExample& e) -> const EmbeddingVector& { return e.features; },
        [](const TrainingExample&) { return 1.0; }, true, grad_w, grad_b);
}

double loss_pa_and_gradient(const PreferenceScorer& scorer, const std::vector<TrainingExample>& examples,
                            std::vector<double>& grad_w, double& grad_b) {
    std::vector<const TrainingExample*> sel;
    for (const auto& e : examples) sel.push_back(&e);
    return bce_and_gradient(
        scorer, sel, [](const TrainingExample& e) -> const EmbeddingVector& { return e.features; },
        [](const TrainingExample& e) { return e.label; }, false, grad_w, grad_b);
}

double RuleApplicabilityLoss::value_and_gradient(const std::vector<TrainingExample>& examples,
                                                 const PreferenceScorer& scorer, std::vector<double>& grad_w,
                                                 double& grad_b) const {
    // One term per source record.
    std::vector<const TrainingExample*> sel;
    for (const auto& e : examples)
        if (e.rule_applicable && e.label == 1.0) sel.push_back(&e);
    return bce_and_gradient(
        scorer, sel, [](const TrainingExample& e) -> const EmbeddingVector& { return e.prompt_features; },
        [](const TrainingExample& e) { return *e.rule_applicable; }, false, grad_w, grad_b);
}

std::unique_ptr<ContextRuleLoss> make_rule_loss(std::string_view name) {
    if (name == "zero") return std::make_unique<ZeroRuleLoss>();
    if (name == "rule_applicability") return std::make_unique<RuleApplicabilityLoss>();
    throw UsageError("UnknownRuleLoss", "unknown context-rule loss '" + std::string(name) + "'");
}

double pairwise_accuracy(const PreferenceScorer& scorer, const std::vector<TrainingExample>& examples) {
    std::map<std::size_t, std::pair<std::optional<double>, std::optional<double>>> pairs;
    for (const auto& e : examples) {
        auto& slot = pairs[e.pair];
        (e.label == 1.0 ? slot.first : slot.second) = scorer.logit(e.features);
    }
    std::size_t total = 0, wins = 0;
    for (const auto& [_, p] : pairs) {
        if (!p.first || !p.second) continue;
        ++total;
        if (*p.first > *p.second) ++wins;
    }
    return total == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(total);
}

// ---- training -----------------------------------------------------------------------

void TrainConfig::check() const {
    weights.check();
    if (!std::isfinite(learning_rate) || learning_rate < 0)
        throw UsageError("InvalidTrainConfig", "learning_rate must be finite and >= 0");
    if (!std::isfinite(init_scale) || init_scale < 0)
        throw UsageError("InvalidTrainConfig", "init_scale must be finite and >= 0");
}

PreferenceScorer train_scorer(const std::vector<TrainingExample>& examples, const TrainConfig& config,
                              const ContextRuleLoss& rule_loss) {
    config.check();
    const bool has_pos = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.label == 1.0; });
    const bool has_neg = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.label == 0.0; });
    if (examples.size() < 2 || !has_pos || !has_neg)
        throw DataError("DegenerateData", "training needs at least two examples covering both labels");
    const auto dim = examples.front().features.dimension();
    for (const auto& e : examples)
        if (e.features.dimension() != dim || e.prompt_features.dimension() != dim)
            throw DataError("DimensionMismatch", "training examples disagree on dimension");

    Rng rng(config.seed);
    std::vector<double> w(dim);
    for (auto& x : w) x = (2.0 * rng.uniform01() - 1.0) * config.init_scale;
    PreferenceScorer scorer(std::move(w), 0.0);

    std::vector<double> gw(dim), tmp(dim);
    double gb = 0.0, tb = 0.0;
    const std::size_t total_epochs = config.epochs_sft + config.epochs;
    for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
        const bool sft_phase = epoch < config.epochs_sft;
        std::fill(gw.begin(), gw.end(), 0.0);
        gb = 0.0;

        const double l_sft = loss_sft_and_gradient(scorer, examples, gw, gb);
        std::fill(tmp.begin(), tmp.end(), 0.0);
        tb = 0.0;
        const double l_pa = loss_pa_and_gradient(scorer, examples, tmp, tb);
        std::vector<double> cr_w(dim, 0.0);
        double cr_b = 0.0;
        const double l_cr = rule_loss.value_and_gradient(examples, scorer, cr_w, cr_b);
        const auto breakdown = loss_total(l_sft, l_cr, l_pa, config.weights);

        if (!sft_phase) {
            for (std::size_t j = 0; j < dim; ++j) gw[j] += config.weights.beta * tmp[j] + config.weights.alpha * cr_w[j];
            gb += config.weights.beta * tb + config.weights.alpha * cr_b;
        }
        scorer.training_log().push_back(
            {epoch + 1, sft_phase ? "sft" : "preference", breakdown, pairwise_accuracy(scorer, examples)});

        for (std::size_t j = 0; j < dim; ++j) scorer.weights()[j] -= config.learning_rate * gw[j];
        scorer.bias() -= config.learning_rate * gb;
    }
    return scorer;
}

PreferenceScorer train_scorer(const std::vector<PreferenceRecord>& records, const Embedder& embedder,
                              const TrainConfig& config, const ContextRuleLoss& rule_loss) {
    if (records.empty()) throw DataError("DegenerateData", "no preference records");
    return train_scorer(make_training_set(records, embedder), config, rule_loss);
}

std::string training_log_to_records(const std::vector<EpochLog>& log) {
    std::string out;
    for (const auto& e : log) {
        ordered_json j;
        j["epoch"] = e.epoch;
        j["phase"] = e.phase;
        j["l_sft"] = e.loss.l_sft;
        j["l_cr"] = e.loss.l_cr;
        j["l_pa"] = e.loss.l_pa;
        j["l_total"] = e.loss.l_total;
        j["alpha"] = e.loss.weights.alpha;
        j["beta"] = e.loss.weights.beta;
        j["pairwise_accuracy"] = e.pairwise_accuracy;
        out += j.dump() + "\n";
    }
    return out;
}

// ---- context-length statistics ----------------------------------------------------

void ContextLengthStats::add(TaskKind kind, std::size_t raw_tokens, std::size_t polished_tokens) {
    raw[kind].push_back(raw_tokens);
    polished[kind].push_back(polished_tokens);
}

std::size_t ContextLengthStats::count(TaskKind kind) const {
    const auto it = raw.find(kind);
    return it == raw.end() ? 0 : it->second.size();
}

namespace {

const std::vector<std::size_t>& samples_of(const ContextLengthStats& s, TaskKind kind, bool polished_side) {
    static const std::vector<std::size_t> none;
    const auto& m = polished_side ? s.polished : s.raw;
    const auto it = m.find(kind);
    return it == m.end() ? none : it->second;
}

}  // namespace

double ContextLengthStats::mean(TaskKind kind, bool polished_side) const {
    const auto& v = samples_of(*this, kind, polished_side);
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (const auto x : v) sum += static_cast<double>(x);
    return sum / static_cast<double>(v.size());
}

double ContextLengthStats::median(TaskKind kind, bool polished_side) const {
    auto v = samples_of(*this, kind, polished_side);
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? static_cast<double>(v[n / 2]) : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
}

std::string ContextLengthStats::to_json() const {
    ordered_json j = ordered_json::object();
    for (const auto& [kind, samples] : raw) {
        auto& k = j[std::string(to_string(kind))];
        k["count"] = samples.size();
        k["raw_mean"] = mean(kind, false);
        k["raw_median"] = median(kind, false);
        k["polished_mean"] = mean(kind, true);
        k["polished_median"] = median(kind, true);
        k["raw"] = samples;
        k["polished"] = samples_of(*this, kind, true);
    }
    return j.dump(2) + "\n";
}

std::string ContextLengthStats::histogram_text(TaskKind kind, bool polished_side, std::size_t bin_width) const {
    if (bin_width == 0) throw UsageError("InvalidBinWidth", "histogram bin width must be >= 1");
    const auto& v = samples_of(*this, kind, polished_side);
    if (v.empty()) return {};
    std::map<std::size_t, std::size_t> bins;
    for (const auto x : v) ++bins[x / bin_width];
    std::string out;
    for (auto b = bins.begin()->first; b <= bins.rbegin()->first; ++b) {
        const auto it = bins.find(b);
        out += std::to_string(b * bin_width) + " " + std::to_string(it == bins.end() ? 0 : it->second) + "\n";
    }
    return out;
}

// ---- polishing -------------------------------------------------------------------------

namespace {

PolishResult polish_one(Gateway& gateway, const TaskPrompt& prompt, const PromptSections& raw, CallTag tag) {
    const auto ex = gateway.complete(prompt.system_text, prompt.user_text, std::move(tag));
    PolishResult r;
    r.polished_text = *ex.response_text;
    r.raw_tokens = token_count(render_sections(raw));
    r.polished_tokens = token_count(r.polished_text);
    return r;
}

}  // namespace

PolishResult polish_context(Gateway& gateway, TaskKind source, const PromptSections& raw, ContextLengthStats& stats,
                            CallTag tag) {
    auto r = polish_one(gateway, build_task_prompt(TaskKind::Polish, raw), raw, std::move(tag));
    stats.add(source, r.raw_tokens, r.polished_tokens);
    return r;
}

std::vector<PolishResult> polish_batch(Gateway& gateway, const std::vector<PolishItem>& items,
                                       ContextLengthStats& stats) {
    // Prompt errors surface before any call is made.
    std::vector<TaskPrompt> prompts;
    for (const auto& item : items) prompts.push_back(build_task_prompt(TaskKind::Polish, item.sections));
    std::vector<std::optional<PolishResult>> results(items.size());
    std::vector<char> started(items.size(), 0);
    const auto base = gateway.transcript().reserve(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex err_mu;
    std::optional<GatewayError> first_error;

    auto worker = [&] {
        for (;;) {
            if (abort.load()) return;
            const auto i = next.fetch_add(1);
            if (i >= items.size()) return;
            started[i] = 1;
            try {
                results[i] = polish_one(gateway, prompts[i], items[i].sections, CallTag{items[i].transcript_id, base + i});
            } catch (const GatewayError& e) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = e;
                abort = true;
                return;
            }
        }
    };
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(gateway.config().max_parallel),
                                                 std::max<std::size_t>(1, items.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<PolishResult> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!started[i]) gateway.transcript().skip(base + i);
        if (!results[i]) continue;
        stats.add(items[i].source, results[i]->raw_tokens, results[i]->polished_tokens);
        out.push_back(std::move(*results[i]));
    }
    if (first_error) throw *first_error;
    return out;
}

}  // namespace constructa
