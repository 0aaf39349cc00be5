#include "constructa/prompts.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "constructa/error.hpp"
#include "constructa/schedule.hpp"
#include "constructa/util.hpp"

namespace constructa {

std::string_view to_string(PromptCategory c) noexcept {
    switch (c) {
        case PromptCategory::ActivitySequenceAndTiming: return "ActivitySequenceAndTiming";
        case PromptCategory::CalculateActivityDuration: return "CalculateActivityDuration";
        case PromptCategory::HierarchicalTreeStructure: return "HierarchicalTreeStructure";
        case PromptCategory::AssessSequenceReconstruction: return "AssessSequenceReconstruction";
        case PromptCategory::AnalyzeTimeRelationships: return "AnalyzeTimeRelationships";
        case PromptCategory::OverlappingDisciplines: return "OverlappingDisciplines";
        case PromptCategory::InterDisciplinaryDependencies: return "InterDisciplinaryDependencies";
        case PromptCategory::AreaBasedDependencies: return "AreaBasedDependencies";
    }
    return "";
}

std::optional<PromptCategory> parse_category(std::string_view name) noexcept {
    for (const auto c : kAllCategories)
        if (to_string(c) == name) return c;
    return std::nullopt;
}

std::string_view to_string(TaskKind k) noexcept {
    switch (k) {
        case TaskKind::MVP: return "MVP";
        case TaskKind::DA: return "DA";
        case TaskKind::AP: return "AP";
        case TaskKind::Polish: return "Polish";
    }
    return "";
}

std::optional<TaskKind> parse_task_kind(std::string_view name) noexcept {
    for (const auto k : {TaskKind::MVP, TaskKind::DA, TaskKind::AP, TaskKind::Polish})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

const std::vector<std::string>& declared_placeholders() {
    static const std::vector<std::string> names{"arity", "columns", "k"};
    return names;
}

std::string category_file_name(PromptCategory c) {
    // CamelCase -> snake_case
    std::string out;
    for (const char ch : to_string(c)) {
        if (std::isupper(static_cast<unsigned char>(ch))) {
            if (!out.empty()) out.push_back('_');
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else {
            out.push_back(ch);
        }
    }
    return out + ".txt";
}

namespace {

std::string task_file_stem(TaskKind k) {
    switch (k) {
        case TaskKind::MVP: return "mvp";
        case TaskKind::DA: return "da";
        case TaskKind::AP: return "ap";
        case TaskKind::Polish: return "polish";
    }
    return "";
}

std::string strip_comments(std::string_view raw) {
    std::vector<std::string> kept;
    for (auto& line : split(raw, '\n'))
        if (line.empty() || line.front() != '#') kept.push_back(std::move(line));
    std::string text = join(kept, "\n");
    while (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

void check_placeholders(const std::string& name, const std::string& text) {
    static const std::regex re(R"(\{\{([^}]*)\}\})");
    const auto& declared = declared_placeholders();
    for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
        const auto ph = (*it)[1].str();
        if (std::find(declared.begin(), declared.end(), ph) == declared.end())
            throw DataError("InvalidPromptRegistry", name + " uses undeclared placeholder '" + ph + "'");
    }
}

PromptRegistry from_files(const std::map<std::string, std::string>& files) {
    PromptRegistry reg;
    std::set<std::string> used;
    auto take = [&](const std::string& rel) {
        const auto it = files.find(rel);
        if (it == files.end()) throw DataError("InvalidPromptRegistry", "missing template " + rel);
        check_placeholders(rel, it->second);
        used.insert(rel);
        return it->second;
    };
    for (const auto c : kAllCategories) reg.categories[c] = take("categories/" + category_file_name(c));
    for (const auto k : {TaskKind::MVP, TaskKind::DA, TaskKind::AP, TaskKind::Polish}) {
        reg.task_system[k] = take("tasks/" + task_file_stem(k) + ".system.txt");
        reg.task_instructions[k] = take("tasks/" + task_file_stem(k) + ".instructions.txt");
    }
    reg.answer_format = take("tasks/answer_format.txt");
    for (const auto& [rel, text] : files)
        if (!used.count(rel)) throw DataError("InvalidPromptRegistry", "unknown template " + rel);
    return reg;
}

std::string substitute(std::string text, const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) {
        const std::string key = "{{" + k + "}}";
        for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + v.size()))
            text.replace(pos, key.size(), v);
    }
    return text;
}

}  // namespace

const PromptRegistry& PromptRegistry::builtin() {
    static const PromptRegistry reg = [] {
        std::map<std::string, std::string> files;
#define PROMPT_TEXT(name, text) files.emplace(name, text);
#include "prompt_texts.inc"
#undef PROMPT_TEXT
        return from_files(files);
    }();
    return reg;
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& dir) {
    std::map<std::string, std::string> files;
    for (const char* sub : {"categories", "tasks"}) {
        const auto d = dir / sub;
        if (!std::filesystem::is_directory(d))
            throw DataError("InvalidPromptRegistry", "missing directory " + d.string());
        for (const auto& entry : std::filesystem::directory_iterator(d)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::stringstream ss;
            ss << in.rdbuf();
            files.emplace(std::string(sub) + "/" + entry.path().filename().string(), strip_comments(ss.str()));
        }
    }
    return from_files(files);
}

std::string build_rule_prompt(PromptCategory category, std::string_view context_text,
                              const PromptRegistry& registry) {
    const auto it = registry.categories.find(category);
    if (it == registry.categories.end())
        throw UsageError("UnknownCategory", std::string(to_string(category)));
    std::string out = it->second;
    out += "\n\n";
    out += header::kContext;
    out += "\n";
    out += context_text;
    if (!context_text.empty() && context_text.back() != '\n') out += "\n";
    return out;
}

std::string render_sections(const PromptSections& s) {
    std::string out;
    auto section = [&](std::string_view h, const std::string& body, bool last) {
        out += h;
        out += "\n";
        out += body;
        if (!body.empty() && body.back() != '\n') out += "\n";
        if (!last) out += "\n";
    };
    section(header::kRow, s.row, false);
    section(header::kStaticKnowledge, s.static_knowledge, false);
    section(header::kContext, s.context, false);
    section(header::kRules, s.rules, true);
    return out;
}

std::optional<PromptSections> extract_sections(std::string_view user_text) {
    const std::string_view heads[] = {header::kRow, header::kStaticKnowledge, header::kContext, header::kRules,
                                      header::kInstructions};
    std::vector<std::size_t> pos;
    std::size_t from = 0;
    for (const auto h : heads) {
        const std::string needle = std::string(h) + "\n";
        std::size_t p = std::string_view::npos;
        // Headers sit at line starts.
        for (auto q = user_text.find(needle, from); q != std::string_view::npos; q = user_text.find(needle, q + 1)) {
            if (q == 0 || user_text[q - 1] == '\n') {
                p = q;
                break;
            }
        }
        if (p == std::string_view::npos) {
            if (h == header::kInstructions) {
                p = user_text.size();
            } else {
                return std::nullopt;
            }
        }
        pos.push_back(p);
        from = p + needle.size();
    }
    auto body = [&](std::size_t i) {
        const auto start = pos[i] + heads[i].size() + 1;
        auto end = pos[i + 1];
        std::string b(user_text.substr(start, end - start));
        // Drop the blank separator line and the trailing newline.
        for (int n = 0; n < 2 && !b.empty() && b.back() == '\n'; ++n) b.pop_back();
        return b;
    };
    PromptSections s;
    s.row = body(0);
    s.static_knowledge = body(1);
    s.context = body(2);
    s.rules = body(3);
    return s;
}

std::string_view sections_block(std::string_view user_text) {
    const std::string needle = "\n" + std::string(header::kInstructions) + "\n";
    const auto p = user_text.find(needle);
    return p == std::string_view::npos ? user_text : user_text.substr(0, p);
}

TaskPrompt build_task_prompt(TaskKind kind, const PromptSections& sections,
                             const std::vector<std::string>& answer_columns, std::size_t k,
                             const PromptRegistry& registry) {
    if (kind == TaskKind::Polish) {
        if (trim(sections.row).empty() && trim(sections.static_knowledge).empty() &&
            trim(sections.context).empty() && trim(sections.rules).empty())
            throw DataError("MissingSection", "polish prompt needs at least one non-empty section");
    } else if (trim(sections.row).empty()) {
        throw DataError("MissingSection", "row section is empty");
    }

    TaskPrompt p;
    p.kind = kind;
    p.system_text = registry.task_system.at(kind);

    if (kind != TaskKind::Polish) {
        std::vector<std::string> cols = answer_columns;
        if (cols.empty()) {
            if (kind == TaskKind::DA)
                cols = {std::string(column::kStatus), std::string(column::kLevel), std::string(column::kArea),
                        std::string(column::kDiscipline)};
            else if (kind == TaskKind::AP)
                cols = {std::string(column::kStart), std::string(column::kFinish)};
        }
        if (kind == TaskKind::MVP && !cols.empty() && cols.size() != 3)
            throw UsageError("ArityMismatch", "MVP prompts ask for exactly three values");
        p.answer_format.arity = kind == TaskKind::MVP ? 3 : cols.size();
        p.answer_format.max_candidates = k;
        p.answer_format.columns = cols;
        std::vector<std::string> quoted;
        for (const auto& c : cols) quoted.push_back("'" + c + "'");
        p.answer_format.description =
            substitute(registry.answer_format, {{"arity", std::to_string(p.answer_format.arity)},
                                                {"columns", cols.empty() ? "marked [MASKED] in the row"
                                                                         : join(quoted, ", ")},
                                                {"k", std::to_string(k)}});
    }

    p.user_text = render_sections(sections);
    p.user_text += "\n";
    p.user_text += header::kInstructions;
    p.user_text += "\n" + registry.task_instructions.at(kind) + "\n";
    if (!p.answer_format.empty()) {
        p.user_text += "\n";
        p.user_text += header::kAnswerFormat;
        p.user_text += "\n" + p.answer_format.description + "\n";
    }
    return p;
}

}  // namespace constructa
