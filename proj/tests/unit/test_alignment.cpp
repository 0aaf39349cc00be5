#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "constructa/alignment.hpp"
#include "constructa/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace constructa;

namespace {

std::vector<double> v(std::initializer_list<double> x) { return x; }

// Twenty pairs whose chosen and rejected features differ along one hidden direction.
std::vector<TrainingExample> separable_pairs(std::uint64_t seed, std::size_t pairs = 20, std::size_t dim = 8) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> dir(dim);
    for (auto& x : dir) x = g(gen);
    std::vector<TrainingExample> out;
    for (std::size_t p = 0; p < pairs; ++p) {
        std::vector<double> base(dim);
        for (auto& x : base) x = 0.3 * g(gen);
        std::vector<double> c(dim), r(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            c[j] = base[j] + 0.5 * dir[j];
            r[j] = base[j] - 0.5 * dir[j];
        }
        const EmbeddingVector prompt(base);
        out.push_back({EmbeddingVector(c), prompt, 1.0, std::nullopt, p});
        out.push_back({EmbeddingVector(r), prompt, 0.0, std::nullopt, p});
    }
    return out;
}

double pa_value(const PreferenceScorer& s, const std::vector<TrainingExample>& ex) {
    std::vector<double> gw(s.dimension());
    double gb = 0;
    return loss_pa_and_gradient(s, ex, gw, gb);
}

}  // namespace

TEST(Losses, Fixtures) {
    EXPECT_NEAR(loss_sft(v({0.5, 0.25}), v({1, 1})), 1.039721, 1e-6);
    EXPECT_NEAR(loss_pa(v({0.9}), v({1})), 0.105361, 1e-6);
    EXPECT_NEAR(loss_pa(v({0.9}), v({0})), 2.302585, 1e-6);
    EXPECT_NEAR(loss_total(1.039721, 0.2, 0.693147, {0.5, 1.0}).l_total, 1.832868, 1e-6);
}

TEST(Losses, MatchDefinitions) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> p(5), y(5);
        for (std::size_t i = 0; i < 5; ++i) {
            p[i] = u(gen);
            y[i] = static_cast<double>(gen() % 2);
        }
        EXPECT_NEAR(loss_pa(p, y), oracle::bce(p, y), 1e-12);
        EXPECT_NEAR(loss_sft(p, y), oracle::sft(p, y), 1e-12);
    }
}

TEST(Losses, PreferenceTermIsSymmetric) {
    for (const double p : {0.1, 0.3, 0.77}) EXPECT_NEAR(loss_pa(v({p}), v({1})), loss_pa(v({1 - p}), v({0})), 1e-12);
}

TEST(Losses, DomainAndClamping) {
    EXPECT_THROW(loss_sft(v({0.0}), v({1})), UsageError);
    EXPECT_THROW(loss_sft(v({1.5}), v({1})), UsageError);
    EXPECT_THROW(loss_sft(v({}), v({})), UsageError);
    EXPECT_THROW(loss_sft(v({0.5}), v({1, 1})), UsageError);
    EXPECT_DOUBLE_EQ(loss_sft(v({0.0, 0.5}), v({0, 1})), -std::log(0.5) / 2);
    EXPECT_TRUE(std::isfinite(loss_pa(v({0.0}), v({1}))));
    EXPECT_NEAR(loss_pa(v({0.0}), v({1})), -std::log(kLogEpsilon), 1e-9);
}

TEST(Losses, TotalIsExactlyTheWeightedSum) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int t = 0; t < 50; ++t) {
        const LossWeights w{u(gen), u(gen)};
        const double a = u(gen), b = u(gen), c = u(gen);
        const auto r = loss_total(a, b, c, w);
        EXPECT_EQ(r.l_total, a + w.alpha * b + w.beta * c);
        EXPECT_EQ(r.l_sft, a);
        EXPECT_EQ(r.weights, w);
    }
    EXPECT_THROW((LossWeights{-1, 1}.check()), UsageError);
}

TEST(Gradients, PreferenceTermMatchesFiniteDifferences) {
    const auto ex = separable_pairs(1, 10, 6);
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double h = 1e-6;
    for (int point = 0; point < 100; ++point) {
        std::vector<double> w(6);
        for (auto& x : w) x = u(gen);
        PreferenceScorer s(w, u(gen));
        std::vector<double> gw(6, 0.0);
        double gb = 0;
        loss_pa_and_gradient(s, ex, gw, gb);
        std::vector<double> num(7);
        for (std::size_t j = 0; j <= 6; ++j) {
            auto plus = s, minus = s;
            (j < 6 ? plus.weights()[j] : plus.bias()) += h;
            (j < 6 ? minus.weights()[j] : minus.bias()) -= h;
            num[j] = (pa_value(plus, ex) - pa_value(minus, ex)) / (2 * h);
        }
        double diff = 0, na = 0, nn = 0;
        for (std::size_t j = 0; j <= 6; ++j) {
            const double a = j < 6 ? gw[j] : gb;
            diff += (a - num[j]) * (a - num[j]);
            na += a * a;
            nn += num[j] * num[j];
        }
        EXPECT_LE(std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}), 1e-5) << point;
    }
}

TEST(Gradients, SftTermMatchesFiniteDifferences) {
    const auto ex = separable_pairs(2, 5, 4);
    PreferenceScorer s({0.3, -0.2, 0.5, 0.1}, 0.05);
    std::vector<double> gw(4, 0.0);
    double gb = 0;
    loss_sft_and_gradient(s, ex, gw, gb);
    auto value = [&](const PreferenceScorer& x) {
        std::vector<double> a(4);
        double b = 0;
        return loss_sft_and_gradient(x, ex, a, b);
    };
    for (std::size_t j = 0; j < 4; ++j) {
        auto p = s, m = s;
        p.weights()[j] += 1e-6;
        m.weights()[j] -= 1e-6;
        EXPECT_NEAR(gw[j], (value(p) - value(m)) / 2e-6, 1e-6);
    }
}

TEST(Training, SeparablePairsReachHighAccuracy) {
    const auto ex = separable_pairs(42);
    TrainConfig cfg;
    cfg.epochs_sft = 10;
    cfg.epochs = 190;
    const auto s = train_scorer(ex, cfg);
    EXPECT_GE(pairwise_accuracy(s, ex), 0.95);
    ASSERT_EQ(s.training_log().size(), 200u);
    EXPECT_EQ(s.training_log().front().phase, "sft");
    EXPECT_EQ(s.training_log().back().phase, "preference");
    EXPECT_EQ(s.training_log().back().epoch, 200u);
}

TEST(Training, SmallStepsNeverIncreaseTheLoss) {
    const auto ex = separable_pairs(7);
    TrainConfig cfg;
    cfg.epochs_sft = 0;
    cfg.epochs = 60;
    cfg.learning_rate = 0.01;
    const auto s = train_scorer(ex, cfg);
    const auto& log = s.training_log();
    for (std::size_t i = 1; i < log.size(); ++i) EXPECT_LE(log[i].loss.l_total, log[i - 1].loss.l_total) << i;
}

TEST(Training, ZeroLearningRateKeepsInitialWeights) {
    const auto ex = separable_pairs(9);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 5;
    const auto a = train_scorer(ex, cfg);
    cfg.epochs = 1;
    cfg.epochs_sft = 0;
    const auto b = train_scorer(ex, cfg);
    EXPECT_EQ(a.weights(), b.weights());
    EXPECT_EQ(a.bias(), 0.0);
    for (const auto w : a.weights()) EXPECT_LE(std::abs(w), cfg.init_scale);
}

TEST(Training, DegenerateInputsRejected) {
    auto ex = separable_pairs(1, 1);
    ex.pop_back();
    EXPECT_THROW(train_scorer(ex, {}), DataError);
    TrainConfig bad;
    bad.learning_rate = -1;
    EXPECT_THROW(bad.check(), UsageError);
}

TEST(Training, RuleLossPlugsIn) {
    auto ex = separable_pairs(3);
    for (std::size_t i = 0; i < ex.size(); i += 2) ex[i].rule_applicable = (i / 2) % 2;
    const auto rule = make_rule_loss("rule_applicability");
    EXPECT_EQ(rule->name(), "rule_applicability");
    PreferenceScorer s(std::vector<double>(8, 0.1), 0.0);
    std::vector<double> gw(8, 0.0);
    double gb = 0;
    EXPECT_GT(rule->value_and_gradient(ex, s, gw, gb), 0.0);
    EXPECT_EQ(make_rule_loss("zero")->value_and_gradient(ex, s, gw, gb), 0.0);
    EXPECT_THROW(make_rule_loss("other"), UsageError);
    TrainConfig cfg;
    const auto trained = train_scorer(ex, cfg, *rule);
    EXPECT_GT(trained.training_log().back().loss.l_cr, 0.0);
}

TEST(Scorer, SaveLoadAndRecords) {
    const auto dir = fixtures::temp_dir("scorer");
    const auto s = train_scorer(separable_pairs(5), TrainConfig{});
    s.save(dir / "s.bin");
    const auto back = PreferenceScorer::load(dir / "s.bin");
    EXPECT_EQ(back.weights(), s.weights());
    EXPECT_EQ(back.bias(), s.bias());
    EXPECT_EQ(std::filesystem::file_size(dir / "s.bin"), 4 + 4 + 4 + 8 + 8 + 8 * s.dimension());
    std::ofstream(dir / "junk.bin") << "nope";
    EXPECT_THROW(PreferenceScorer::load(dir / "junk.bin"), DataError);
    EXPECT_THROW(PreferenceScorer::load(dir / "missing.bin"), DataError);
    const auto text = training_log_to_records(s.training_log());
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), s.training_log().size());
    EXPECT_THROW(s.logit(EmbeddingVector({1.0})), UsageError);
}

TEST(Scorer, TrainsFromPreferenceRecords) {
    HashedNgramEmbedder e(64);
    std::vector<PreferenceRecord> recs;
    for (int i = 0; i < 12; ++i) {
        PreferenceRecord r;
        r.prompt_text = "Row A" + std::to_string(i);
        r.chosen_text = "[Value]SF[/Value] structural steel frame";
        r.rejected_text = "[Value]__WRONG__[/Value] nothing";
        recs.push_back(r);
    }
    const auto set = make_training_set(recs, e);
    ASSERT_EQ(set.size(), 24u);
    EXPECT_EQ(set[0].label, 1.0);
    EXPECT_EQ(set[1].label, 0.0);
    EXPECT_EQ(set[1].pair, 0u);
    TrainConfig cfg;
    cfg.epochs = 50;
    const auto s = train_scorer(recs, e, cfg);
    EXPECT_GT(s.score(e, recs[0].prompt_text, recs[0].chosen_text),
              s.score(e, recs[0].prompt_text, recs[0].rejected_text));
    EXPECT_EQ(scorer_input("p", "c"), "p\nc");
}

TEST(ContextLengths, StatsAndHistogram) {
    ContextLengthStats st;
    for (const std::size_t x : {10, 60, 65, 210}) st.add(TaskKind::DA, x, x / 2);
    EXPECT_EQ(st.count(TaskKind::DA), 4u);
    EXPECT_EQ(st.count(TaskKind::AP), 0u);
    EXPECT_DOUBLE_EQ(st.mean(TaskKind::DA, false), 86.25);
    EXPECT_DOUBLE_EQ(st.median(TaskKind::DA, false), 62.5);
    EXPECT_EQ(st.histogram_text(TaskKind::DA, false, 50), "0 1\n50 2\n100 0\n150 0\n200 1\n");
    EXPECT_EQ(st.histogram_text(TaskKind::AP, false), "");
    EXPECT_THROW(st.histogram_text(TaskKind::DA, false, 0), UsageError);
    EXPECT_NE(st.to_json().find("\"DA\""), std::string::npos);
}

TEST(Polishing, StopwordStripperNeverLengthens) {
    GeneratorParams p;
    p.n_activities = 30;
    const auto s = generate_schedule(p);
    const auto g = build_graph(s);
    auto gw = register_mock(MockKind::StopwordStripper, {});
    ContextLengthStats st;
    std::vector<PolishItem> items;
    const auto rows = to_rows(s);
    for (std::size_t i = 0; i < s.activities.size(); ++i) {
        PromptSections sec;
        sec.row = render_masked_row(rows[i], {"Level"});
        sec.context = render_context(combined_context(g, s, s.activities[i].id, {}), s);
        sec.rules = "The successor of the activity is in the same area as the predecessor.";
        items.push_back({static_cast<TaskKind>(i % 3), sec, "polish:" + s.activities[i].id});
    }
    const auto out = polish_batch(*gw, items, st);
    ASSERT_EQ(out.size(), items.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_LE(out[i].polished_tokens, out[i].raw_tokens);
        EXPECT_EQ(out[i].raw_tokens, token_count(render_sections(items[i].sections)));
        EXPECT_EQ(out[i].polished_tokens, token_count(out[i].polished_text));
    }
    for (const auto k : {TaskKind::MVP, TaskKind::DA, TaskKind::AP}) {
        EXPECT_EQ(st.count(k), 10u);
        EXPECT_LT(st.mean(k, true), st.mean(k, false));
    }
    const auto single = polish_context(*gw, TaskKind::MVP, items[0].sections, st);
    EXPECT_EQ(single.polished_text, out[0].polished_text);
    EXPECT_EQ(st.count(TaskKind::MVP), 11u);
}
