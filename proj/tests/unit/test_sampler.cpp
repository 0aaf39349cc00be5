#include <gtest/gtest.h>

#include "constructa/sampler.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace constructa;

TEST(Sampler, ChainContext) {
    const auto s = fixtures::chain();
    const auto g = build_graph(s);
    EXPECT_EQ(first_order(g, "B"), (std::set<std::string>{"A", "C"}));
    SamplerConfig cfg;
    const auto paths = sample_sequential(g, "A", cfg);
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths.begin()->nodes, (std::vector<std::string>{"A", "B", "C"}));
    EXPECT_EQ(paths.begin()->direction, PathDirection::Forward);
    EXPECT_EQ(sample_hierarchical(s, "A", cfg), (std::set<std::string>{"B", "C"}));
}

TEST(Sampler, OracleEquivalenceOnRandomDags) {
    SamplerConfig cfg;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = fixtures::random_dag(seed, 2 + seed % 49, 0.1);
        const auto g = build_graph(s);
        const auto adj = oracle::adjacency(s);
        for (const auto& a : s.activities) {
            const auto fwd = oracle::bfs(adj, a.id, true);
            const auto bwd = oracle::bfs(adj, a.id, false);
            for (const auto& p : sample_sequential(g, a.id, cfg)) {
                ASSERT_EQ(p.nodes.front(), a.id);
                ASSERT_LE(p.nodes.size(), 4u);
                const auto& dist = p.direction == PathDirection::Forward ? fwd : bwd;
                std::set<std::string> uniq(p.nodes.begin(), p.nodes.end());
                ASSERT_EQ(uniq.size(), p.nodes.size());
                for (std::size_t i = 0; i < p.nodes.size(); ++i) {
                    ASSERT_TRUE(dist.count(p.nodes[i]));
                    ASSERT_LE(dist.at(p.nodes[i]), 3);
                    if (i > 0) {
                        const bool fw = p.direction == PathDirection::Forward;
                        ASSERT_TRUE(fw ? oracle::has_link(adj, p.nodes[i - 1], p.nodes[i])
                                      : oracle::has_link(adj, p.nodes[i], p.nodes[i - 1]));
                    }
                }
            }
            ASSERT_EQ(sample_hierarchical(s, a.id, cfg), oracle::wbs_prefix_filter(s, a.id, cfg.max_wbs_levels));
            ASSERT_EQ(first_order(g, a.id), oracle::raw_neighbours(s, a.id));
        }
    }
}

TEST(Sampler, WbsLevelsWidenTheFilter) {
    auto s = fixtures::make_schedule({"T", "S", "C", "O"}, {});
    s.activities[0].wbs = {"F", "A", "B", "C"};
    s.activities[1].wbs = {"F", "A", "B", "D"};
    s.activities[2].wbs = {"F", "A", "X"};
    s.activities[3].wbs = {"G"};
    SamplerConfig cfg;
    cfg.max_wbs_levels = 1;
    EXPECT_EQ(sample_hierarchical(s, "T", cfg), (std::set<std::string>{"S"}));
    cfg.max_wbs_levels = 2;
    EXPECT_EQ(sample_hierarchical(s, "T", cfg), (std::set<std::string>{"C", "S"}));
    cfg.max_wbs_levels = 9;
    EXPECT_EQ(sample_hierarchical(s, "T", cfg), (std::set<std::string>{"C", "S"}));
}

TEST(Sampler, SeededAndRoundTrips) {
    const auto s = fixtures::random_dag(4, 40, 0.15);
    const auto g = build_graph(s);
    SamplerConfig cfg;
    const auto a = combined_context(g, s, "N3", cfg);
    const auto b = combined_context(g, s, "N3", cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(bundle_from_record(bundle_to_record(a)), a);
    const auto text = render_context(a, s);
    EXPECT_NE(text.find("FIRST-ORDER:"), std::string::npos);
    EXPECT_NE(text.find("HIERARCHICAL:"), std::string::npos);
    EXPECT_NE(text.find("SEQUENTIAL:"), std::string::npos);
    EXPECT_THROW(bundle_from_record("{not json"), DataError);
    EXPECT_THROW(combined_context(g, s, "missing", cfg), DataError);
}

TEST(Sampler, ConfigChecks) {
    SamplerConfig cfg;
    cfg.max_sequential_hops = -1;
    EXPECT_THROW(cfg.check(), UsageError);
}
