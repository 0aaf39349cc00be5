#include <gtest/gtest.h>

#include <fstream>

#include "constructa/config.hpp"
#include "fixtures.hpp"

using namespace constructa;

namespace {

std::string code_of(const std::string& ini) {
    try {
        RunConfig::from_ini_text(ini);
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
    const RunConfig c;
    const auto ini = c.to_ini();
    const auto back = RunConfig::from_ini_text(ini);
    EXPECT_EQ(back.to_ini(), ini);
    EXPECT_EQ(back.hash(), c.hash());
    EXPECT_EQ(c.hash().size(), 64u);
    for (const auto* section : {"[paths]", "[gateway]", "[sampler]", "[eval]", "[loss]", "[embed]"})
        EXPECT_NE(ini.find(section), std::string::npos) << section;
}

TEST(Config, ReadsEveryKind) {
    const auto c = RunConfig::from_ini_text(
        "[paths]\nschedule = s.csv\n"
        "[gateway]\nselector = mock:wrong\ntemperature = 0.25\nmax_parallel = 2\nforward_seed = no\n"
        "[sampler]\nmax_sequential_hops = 2\n"
        "[eval]\ntasks = DA, AP\nk = 3\ndate_tolerance_days = 1\nsynthesize_negatives = true\n"
        "[loss]\nalpha = 0.25\nrule_loss = rule_applicability\n"
        "[embed]\ndimension = 64\n");
    EXPECT_EQ(c.paths.schedule, "s.csv");
    EXPECT_EQ(c.gateway_selector, "mock:wrong");
    EXPECT_EQ(c.gateway.temperature, 0.25);
    EXPECT_EQ(c.gateway.max_parallel, 2);
    EXPECT_FALSE(c.gateway.forward_seed);
    EXPECT_EQ(c.sampler.max_sequential_hops, 2);
    EXPECT_EQ(c.eval.tasks, (std::vector<TaskKind>{TaskKind::DA, TaskKind::AP}));
    EXPECT_EQ(c.eval.k, 3u);
    EXPECT_EQ(c.eval.date_tolerance_days, std::optional<int>(1));
    EXPECT_TRUE(c.eval.synthesize_negatives);
    EXPECT_EQ(c.loss.weights.alpha, 0.25);
    EXPECT_EQ(c.loss.rule_loss, "rule_applicability");
    EXPECT_EQ(c.embed_dimension, 64u);
    EXPECT_EQ(RunConfig::from_ini_text(c.to_ini()).to_ini(), c.to_ini());
    EXPECT_NE(c.hash(), RunConfig{}.hash());
}

TEST(Config, RejectsBadInput) {
    EXPECT_EQ(code_of("[gateway]\nbogus = 1\n"), "InvalidConfig");
    EXPECT_EQ(code_of("[nosuch]\nkey = 1\n"), "InvalidConfig");
    EXPECT_EQ(code_of("[eval]\nk = two\n"), "InvalidConfig");
    EXPECT_EQ(code_of("[eval]\ntasks = MVP,XYZ\n"), "InvalidConfig");
    EXPECT_EQ(code_of("[gateway]\nforward_seed = maybe\n"), "InvalidConfig");
    EXPECT_EQ(code_of("[gateway]\nmax_parallel = 0\n"), "InvalidGatewayConfig");
    EXPECT_EQ(code_of("[loss]\nrule_loss = other\n"), "UnknownRuleLoss");
    EXPECT_EQ(code_of("[paths\n"), "InvalidConfig");
}

TEST(Config, FileLoading) {
    const auto dir = fixtures::temp_dir("config");
    std::ofstream(dir / "c.ini") << "[eval]\nseed = 7\n";
    EXPECT_EQ(RunConfig::from_file(dir / "c.ini").eval.seed, 7u);
    EXPECT_THROW(RunConfig::from_file(dir / "missing.ini"), DataError);
}

TEST(Config, TaskLists) {
    EXPECT_EQ(parse_task_list("AP,MVP,AP"), (std::vector<TaskKind>{TaskKind::AP, TaskKind::MVP}));
    EXPECT_THROW(parse_task_list(" , "), UsageError);
    EXPECT_THROW(parse_task_list("Polish"), UsageError);
}
