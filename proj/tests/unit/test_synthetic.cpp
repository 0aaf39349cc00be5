#include <gtest/gtest.h>

#include "constructa/graph.hpp"
#include "constructa/synthetic.hpp"
#include "fixtures.hpp"

using namespace constructa;

namespace {

GeneratorParams params(std::size_t n, std::uint64_t seed = 42) {
    GeneratorParams p;
    p.n_activities = n;
    p.seed = seed;
    return p;
}

// Whether the two activities' dates satisfy the link, written per relation type.
bool honoured(const Activity& pred, const Activity& succ, const DependencyLink& l) {
    const auto lag = std::chrono::days{l.lag_days};
    switch (l.relation) {
        case Relation::FS: return succ.start >= pred.finish + lag;
        case Relation::SS: return succ.start >= pred.start + lag;
        case Relation::FF: return succ.finish >= pred.finish + lag;
        case Relation::SF: return succ.finish >= pred.start + lag;
    }
    return false;
}

}  // namespace

TEST(Generator, SingleActivity) {
    const auto s = generate_schedule([] {
        auto p = params(1);
        p.target_mean_degree = 0;
        return p;
    }());
    ASSERT_EQ(s.activities.size(), 1u);
    EXPECT_TRUE(s.links.empty());
    EXPECT_TRUE(validate(s).empty());
    EXPECT_THROW(generate_schedule(params(1)), UsageError);
}

TEST(Generator, DeterministicPerSeed) {
    EXPECT_EQ(generate_schedule(params(150, 7)), generate_schedule(params(150, 7)));
    EXPECT_NE(generate_schedule(params(150, 7)), generate_schedule(params(150, 8)));
    EXPECT_EQ(serialize_schedule(generate_schedule(params(80))), serialize_schedule(generate_schedule(params(80))));
}

TEST(Generator, StructuralTargetsAtScale) {
    const auto s = generate_schedule(params(1000));
    EXPECT_TRUE(validate(s).empty());
    const auto g = build_graph(s);
    EXPECT_TRUE(detect_cycles(g).empty());
    const double mean = degree_distribution(g).degree_mean;
    EXPECT_GE(mean, 3.86 * 0.85);
    EXPECT_LE(mean, 3.86 * 1.15);
    EXPECT_TRUE(std::is_sorted(s.links.begin(), s.links.end(), [](const auto& a, const auto& b) {
        return std::tie(a.predecessor_id, a.successor_id) < std::tie(b.predecessor_id, b.successor_id);
    }));
}

TEST(Generator, DatesHonourEveryLink) {
    for (const std::uint64_t seed : {1, 2, 3}) {
        const auto s = generate_schedule(params(300, seed));
        for (const auto& a : s.activities) {
            EXPECT_GE(duration_days(a), 1);
            EXPECT_LE(duration_days(a), 20);
            EXPECT_GE(a.start, *parse_iso_date("2024-01-02"));
        }
        for (const auto& l : s.links)
            EXPECT_TRUE(honoured(*s.find(l.predecessor_id), *s.find(l.successor_id), l))
                << l.predecessor_id << "->" << l.successor_id;
    }
}

TEST(Generator, AttributesComeFromTheConfiguredLists) {
    auto p = params(200);
    p.areas = {{"NORTH", 1.0}};
    const auto s = generate_schedule(p);
    std::set<std::string> disciplines;
    for (const auto& [d, w] : GeneratorParams::default_disciplines()) disciplines.insert(d);
    for (const auto& a : s.activities) {
        EXPECT_EQ(a.area, "NORTH");
        EXPECT_TRUE(disciplines.count(a.discipline)) << a.discipline;
        EXPECT_FALSE(a.name.empty());
        EXPECT_GE(a.wbs.size(), 2u);
    }
}

TEST(Generator, ParamChecks) {
    auto p = params(10);
    p.window = 0;
    EXPECT_THROW(p.check(), UsageError);
    p = params(10);
    p.levels = {{"SF", -1.0}};
    EXPECT_THROW(p.check(), UsageError);
    p = params(10);
    p.levels = {{"XX", 1.0}};
    EXPECT_THROW(generate_schedule(p), UsageError);
}

TEST(Matrices, PearsonKnownValues) {
    auto s = fixtures::make_schedule({"A", "B", "C"}, {});
    s.activities[0].start = fixtures::day(0);
    s.activities[1].start = fixtures::day(1);
    s.activities[2].start = fixtures::day(2);
    s.activities[0].finish = fixtures::day(12);
    s.activities[1].finish = fixtures::day(11);
    s.activities[2].finish = fixtures::day(10);
    const auto m = pearson_matrix(s, {"Current Start", "Current Finish", "Area"});
    EXPECT_NEAR(m.values[0][1], -1.0, 1e-12);
    EXPECT_NEAR(m.values[1][0], -1.0, 1e-12);
    EXPECT_NEAR(m.values[0][0], 1.0, 1e-12);
    EXPECT_TRUE(m.constant[2]);
    EXPECT_EQ(m.values[2][2], 1.0);
    EXPECT_EQ(m.values[0][2], 0.0);
    EXPECT_NE(m.to_text().find("constant"), std::string::npos);
    EXPECT_THROW(pearson_matrix(fixtures::make_schedule({"A"}, {}), {"Level"}), DataError);
    EXPECT_THROW(pearson_matrix(s, {"Nope"}), DataError);
}

TEST(Matrices, PearsonSymmetricAndBounded) {
    const auto s = generate_schedule(params(200));
    const auto m = pearson_matrix(s, default_matrix_attributes());
    const auto n = m.labels.size();
    ASSERT_EQ(n, default_matrix_attributes().size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_NEAR(m.values[i][j], m.values[j][i], 1e-12);
            EXPECT_LE(std::abs(m.values[i][j]), 1.0 + 1e-12);
        }
}

TEST(Matrices, CosineSymmetricWithUnitDiagonal) {
    const auto s = generate_schedule(params(100));
    HashedNgramEmbedder e(128);
    const auto m = cosine_matrix(s, default_matrix_attributes(), e);
    EXPECT_EQ(m.kind, MatrixKind::Cosine);
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        EXPECT_NEAR(m.values[i][i], 1.0, 1e-12);
        for (std::size_t j = 0; j < m.labels.size(); ++j) EXPECT_NEAR(m.values[i][j], m.values[j][i], 1e-12);
    }
    EXPECT_THROW(cosine_matrix(s, {"Zone", "Unknown"}, e), DataError);
}
