#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace constructa {

enum class PromptCategory {
    ActivitySequenceAndTiming,
    CalculateActivityDuration,
    HierarchicalTreeStructure,
    AssessSequenceReconstruction,
    AnalyzeTimeRelationships,
    OverlappingDisciplines,
    InterDisciplinaryDependencies,
    AreaBasedDependencies,
};

inline constexpr std::array<PromptCategory, 8> kAllCategories{
    PromptCategory::ActivitySequenceAndTiming,    PromptCategory::CalculateActivityDuration,
    PromptCategory::HierarchicalTreeStructure,    PromptCategory::AssessSequenceReconstruction,
    PromptCategory::AnalyzeTimeRelationships,     PromptCategory::OverlappingDisciplines,
    PromptCategory::InterDisciplinaryDependencies, PromptCategory::AreaBasedDependencies};

std::string_view to_string(PromptCategory c) noexcept;
std::optional<PromptCategory> parse_category(std::string_view name) noexcept;

enum class TaskKind { MVP, DA, AP, Polish };

std::string_view to_string(TaskKind k) noexcept;
std::optional<TaskKind> parse_task_kind(std::string_view name) noexcept;

/// Fixed section headers of a task prompt's user text.
namespace header {
inline constexpr std::string_view kRow = "ROW:";
inline constexpr std::string_view kStaticKnowledge = "STATIC KNOWLEDGE:";
inline constexpr std::string_view kContext = "CONTEXT:";
inline constexpr std::string_view kRules = "RULES:";
inline constexpr std::string_view kInstructions = "INSTRUCTIONS:";
inline constexpr std::string_view kAnswerFormat = "ANSWER FORMAT:";
}  // namespace header

/// Cell text standing in for a hidden ground-truth value in a ROW section,
/// whose lines read `<column>: <value>`.
inline constexpr std::string_view kMaskedCell = "[MASKED]";

/// Placeholder names a template may use as `{{name}}`.
const std::vector<std::string>& declared_placeholders();

/// All prompt texts. The built-in registry mirrors the files under prompts/.
struct PromptRegistry {
    std::map<PromptCategory, std::string> categories;
    std::map<TaskKind, std::string> task_system;
    std::map<TaskKind, std::string> task_instructions;
    std::string answer_format;

    static const PromptRegistry& builtin();
    /// Reads prompts/categories/*.txt and prompts/tasks/*.txt. Lines starting
    /// with '#' are comments. Throws DataError "InvalidPromptRegistry" when a
    /// template is missing, duplicated, unknown, or uses undeclared placeholders.
    static PromptRegistry load(const std::filesystem::path& dir);

    bool operator==(const PromptRegistry&) const = default;
};

std::string category_file_name(PromptCategory c);

/// Template, then the context under a CONTEXT: header. Byte-deterministic.
std::string build_rule_prompt(PromptCategory category, std::string_view context_text,
                              const PromptRegistry& registry = PromptRegistry::builtin());

struct PromptSections {
    std::string row;
    std::string static_knowledge;
    std::string context;
    std::string rules;
};

/// The four labelled sections in fixed order, blank line separated.
std::string render_sections(const PromptSections& sections);
/// Inverse of render_sections on a user_text (the part before INSTRUCTIONS:).
std::optional<PromptSections> extract_sections(std::string_view user_text);
/// The rendered sections block of a task prompt's user text, verbatim.
std::string_view sections_block(std::string_view user_text);

struct AnswerFormat {
    std::size_t arity = 0;
    std::size_t max_candidates = 2;
    std::vector<std::string> columns;
    std::string description;

    bool empty() const noexcept { return arity == 0; }
};

struct TaskPrompt {
    TaskKind kind = TaskKind::MVP;
    std::string system_text;
    std::string user_text;
    AnswerFormat answer_format;
};

/// Throws DataError "MissingSection" when the row is empty for MVP/DA/AP or
/// every section is empty for Polish; UsageError "ArityMismatch" when an MVP
/// prompt is given a column list that is not three long.
TaskPrompt build_task_prompt(TaskKind kind, const PromptSections& sections,
                             const std::vector<std::string>& answer_columns = {}, std::size_t k = 2,
                             const PromptRegistry& registry = PromptRegistry::builtin());

}  // namespace constructa
