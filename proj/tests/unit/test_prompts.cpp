#include <gtest/gtest.h>

#include <fstream>

#include "constructa/prompts.hpp"
#include "fixtures.hpp"

using namespace constructa;

namespace {

PromptSections sample_sections() {
    return {"Activity ID: A1\nLevel: [MASKED]", "TERM FS: finish to start", "TARGET: A1", "R1. keep order"};
}

}  // namespace

TEST(Registry, PromptDirectoryMatchesBuiltin) {
    const auto loaded = PromptRegistry::load(fixtures::source_dir() / "prompts");
    EXPECT_EQ(loaded, PromptRegistry::builtin());
    EXPECT_EQ(loaded.categories.size(), kAllCategories.size());
}

TEST(Registry, RejectsMissingOrUnknownTemplates) {
    const auto dir = fixtures::temp_dir("registry");
    std::filesystem::copy(fixtures::source_dir() / "prompts", dir, std::filesystem::copy_options::recursive);
    PromptRegistry::load(dir);
    std::ofstream(dir / "categories" / "extra.txt") << "unexpected\n";
    EXPECT_THROW(PromptRegistry::load(dir), DataError);
    std::filesystem::remove(dir / "categories" / "extra.txt");
    std::ofstream(dir / "tasks" / "mvp.system.txt") << "uses {{nonsense}}\n";
    EXPECT_THROW(PromptRegistry::load(dir), DataError);
    std::filesystem::remove(dir / "tasks" / "mvp.system.txt");
    EXPECT_THROW(PromptRegistry::load(dir), DataError);
}

TEST(Names, CategoriesAndTasksRoundTrip) {
    for (const auto c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
    for (const auto k : {TaskKind::MVP, TaskKind::DA, TaskKind::AP, TaskKind::Polish})
        EXPECT_EQ(parse_task_kind(to_string(k)), k);
    EXPECT_FALSE(parse_category("nope"));
}

TEST(RulePrompt, TemplateThenContext) {
    const auto& reg = PromptRegistry::builtin();
    for (const auto c : kAllCategories) {
        const auto p = build_rule_prompt(c, "TARGET: A1");
        EXPECT_EQ(p.rfind(reg.categories.at(c), 0), 0u);
        EXPECT_NE(p.find("\nCONTEXT:\nTARGET: A1\n"), std::string::npos);
        EXPECT_EQ(p, build_rule_prompt(c, "TARGET: A1"));
    }
}

TEST(Sections, RenderExtractInverse) {
    const auto s = sample_sections();
    const auto text = render_sections(s);
    const auto back = extract_sections(text);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->row, s.row);
    EXPECT_EQ(back->static_knowledge, s.static_knowledge);
    EXPECT_EQ(back->context, s.context);
    EXPECT_EQ(back->rules, s.rules);
    EXPECT_FALSE(extract_sections("no headers here"));
    const PromptSections empty{"r", "", "", ""};
    const auto e = extract_sections(render_sections(empty));
    ASSERT_TRUE(e);
    EXPECT_EQ(e->static_knowledge, "");
}

TEST(TaskPrompt, LayoutAndAnswerFormat) {
    const auto p = build_task_prompt(TaskKind::MVP, sample_sections(), {"Level", "Area", "Zone"}, 2);
    EXPECT_EQ(p.system_text, PromptRegistry::builtin().task_system.at(TaskKind::MVP));
    EXPECT_EQ(p.answer_format.arity, 3u);
    EXPECT_EQ(p.answer_format.max_candidates, 2u);
    for (const auto h : {"ROW:\n", "STATIC KNOWLEDGE:\n", "CONTEXT:\n", "RULES:\n", "INSTRUCTIONS:\n", "ANSWER FORMAT:\n"})
        EXPECT_NE(p.user_text.find(h), std::string::npos) << h;
    EXPECT_LT(p.user_text.find("RULES:"), p.user_text.find("INSTRUCTIONS:"));
    EXPECT_EQ(std::string(sections_block(p.user_text)), render_sections(sample_sections()));
    const auto back = extract_sections(p.user_text);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->rules, sample_sections().rules);
}

TEST(TaskPrompt, DefaultsAndErrors) {
    EXPECT_EQ(build_task_prompt(TaskKind::DA, sample_sections()).answer_format.arity, 4u);
    EXPECT_EQ(build_task_prompt(TaskKind::AP, sample_sections()).answer_format.arity, 2u);
    const auto polish = build_task_prompt(TaskKind::Polish, {"", "", "ctx", ""});
    EXPECT_TRUE(polish.answer_format.empty());
    EXPECT_EQ(polish.user_text.find("ANSWER FORMAT:"), std::string::npos);
    EXPECT_THROW(build_task_prompt(TaskKind::MVP, sample_sections(), {"Level"}), UsageError);
    EXPECT_THROW(build_task_prompt(TaskKind::DA, {"", "k", "c", "r"}), DataError);
    EXPECT_THROW(build_task_prompt(TaskKind::Polish, {"", " ", "", ""}), DataError);
}

TEST(TaskPrompt, ByteDeterministic) {
    const auto a = build_task_prompt(TaskKind::AP, sample_sections());
    const auto b = build_task_prompt(TaskKind::AP, sample_sections());
    EXPECT_EQ(a.user_text, b.user_text);
    EXPECT_EQ(a.system_text, b.system_text);
}
