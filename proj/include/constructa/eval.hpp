#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "constructa/gateway.hpp"
#include "constructa/knowledge.hpp"
#include "constructa/prompts.hpp"
#include "constructa/sampler.hpp"
#include "constructa/schedule.hpp"

namespace constructa {

/// Columns MVP may hide: every canonical column except the identity pair.
const std::vector<std::string>& default_maskable_columns();
/// The relational columns hidden by DA, in row order.
const std::vector<std::string>& relational_columns();
/// The date columns hidden by AP.
const std::vector<std::string>& date_columns();

struct MaskSpec {
    std::string row_id;
    TaskKind task_kind = TaskKind::MVP;
    std::vector<std::string> masked_columns;
    std::map<std::string, std::string> ground_truth;  // column -> canonical value

    bool operator==(const MaskSpec&) const = default;
};

/// One spec per activity, in schedule order. MVP draws three distinct columns
/// per row from Rng::stream(seed, row_id). Masked columns are always listed in
/// the row's column order, which is also the answer order.
/// Throws UsageError "TooFewColumns" (MVP with < 3 maskable columns) or
/// "InvalidTaskKind".
std::vector<MaskSpec> make_mask_tasks(const Schedule& schedule, TaskKind kind, std::uint64_t seed = 42,
                                      const std::vector<std::string>& maskable = default_maskable_columns());

/// The activity's row as `<column>: <value>` lines with masked cells hidden.
std::string render_masked_row(const Row& row, const std::vector<std::string>& masked_columns);

/// activity id -> column -> value, for the echo oracle.
GroundTruthTable ground_truth_table(const Schedule& schedule);

struct Completion {
    std::string raw_text;
    std::vector<std::vector<std::string>> parsed_cells;
    bool parse_ok = false;

    bool operator==(const Completion&) const = default;
};

/// `[Value]a|b[/Value]` items left to right, each trimmed and cut to k
/// candidates. parse_ok iff the item count equals expected_arity.
Completion parse_values(std::string_view raw_text, std::size_t expected_arity, std::size_t k = 2);

/// Wire-format answer list with one candidate per cell.
std::string render_value_list(const std::vector<std::string>& values);

enum class ColumnKind { Text, Date };
ColumnKind column_kind(std::string_view column);

/// Trim, case-fold, collapse whitespace; dates are reparsed to ISO.
std::string canonical_cell(std::string_view value, ColumnKind kind);

/// True iff canonical(truth) is among the canonical candidates. With a
/// tolerance, date candidates within that many days of the truth also count.
bool score_cell(const std::vector<std::string>& candidates, std::string_view truth, ColumnKind kind,
                std::optional<int> date_tolerance_days = std::nullopt);

struct Tally {
    std::size_t cells = 0;
    std::size_t correct_cells = 0;
    std::size_t rows = 0;
    std::size_t correct_rows = 0;
    std::size_t parse_failures = 0;

    /// Percentages; 0 when there is nothing to count.
    double cell_accuracy() const noexcept;
    double row_accuracy() const noexcept;
    void add(const Tally& other) noexcept;
    bool operator==(const Tally&) const = default;
};

/// Grouping dimensions of the breakdowns.
inline constexpr std::string_view kByDiscipline = "discipline";
inline constexpr std::string_view kByLevel = "level";
inline constexpr std::string_view kByArea = "area";

struct ScoreReport {
    std::map<TaskKind, Tally> per_task;
    /// dimension -> group value -> task -> tally
    std::map<std::string, std::map<std::string, std::map<TaskKind, Tally>>> groups;
    std::size_t k = 2;
    std::optional<int> date_tolerance_days;
    bool complete = true;

    /// Cell-mode accuracy in percent (0 for a task that was not run).
    double accuracy(TaskKind kind) const;
    /// Table-shaped text: one line per discipline then level then area.
    std::string to_table() const;
    /// Machine-readable record with both cell and row tallies.
    std::string to_json() const;

    bool operator==(const ScoreReport&) const = default;
};

struct EvalInstance {
    MaskSpec spec;
    std::map<std::string, std::string> groups;  // dimension -> value
    std::string transcript_id;
    std::string system_text;
    std::string user_text;
    Completion completion;
    std::vector<bool> cell_correct;

    bool all_correct() const;
    bool operator==(const EvalInstance&) const = default;
};

struct EvalOptions {
    std::size_t k = 2;
    std::optional<int> date_tolerance_days;
};

struct EvalRun {
    std::vector<EvalInstance> instances;  // task order
    ScoreReport report;
};

/// Fold over instances; order independent.
ScoreReport build_report(const std::vector<EvalInstance>& instances, const EvalOptions& options);

std::string eval_instances_to_records(const std::vector<EvalInstance>& instances);
/// Throws DataError "CorruptRecord" with a line number.
std::vector<EvalInstance> eval_instances_from_records(std::string_view text);

/// What fills the STATIC KNOWLEDGE, CONTEXT and RULES sections for a task.
struct PromptInputs {
    std::function<std::string(const Activity&)> static_knowledge;
    std::function<std::string(const Activity&)> context;
    std::string rules;
};

/// Thrown by run_eval when the gateway fails; carries the scored part.
class EvalIncomplete : public GatewayError {
public:
    EvalIncomplete(const GatewayError& cause, EvalRun partial)
        : GatewayError(cause.code(), cause.message(), cause.transient(), cause.http_status()),
          partial_(std::move(partial)) {}
    const EvalRun& partial() const noexcept { return partial_; }

private:
    EvalRun partial_;
};

/// Prompts the gateway for every task (up to max_parallel at once) and scores
/// the answers. Transcript order follows task order.
/// Throws DataError "UnknownActivity"; EvalIncomplete on gateway failure.
EvalRun run_eval(const Schedule& schedule, const std::vector<MaskSpec>& tasks, Gateway& gateway,
                 const PromptInputs& inputs, const EvalOptions& options = {});

/// Context from the sampled bundle; static knowledge from the best term plus
/// the top three chunks, both retrieved with the rendered context as query.
PromptInputs krag_inputs(const ScheduleGraph& graph, const Schedule& schedule, const SamplerConfig& sampler,
                         const TermStore* terms, const ChunkStore* chunks, const Embedder* embedder,
                         std::string rules = {});

struct PreferenceRecord {
    std::string prompt_text;
    std::string chosen_text;
    std::string rejected_text;
    TaskKind task_kind = TaskKind::MVP;
    std::string row_id;
    std::size_t context_length_tokens = 0;
    std::map<std::string, std::string> meta;

    bool operator==(const PreferenceRecord&) const = default;
};

struct PreferenceOptions {
    /// Pair correct answers against a same-column swap from another row.
    bool synthesize_negatives = false;
    std::uint64_t seed = 42;
};

/// One record per (task, row) with a wrong answer in any run: chosen is the
/// rendered ground truth, rejected the first wrong raw completion; later wrong
/// completions are kept in meta.
std::vector<PreferenceRecord> collect_preferences(std::span<const EvalRun> runs,
                                                  const PreferenceOptions& options = {});

std::string preference_to_record(const PreferenceRecord& record);
PreferenceRecord preference_from_record(std::string_view line);

/// Line-delimited preference database.
class PreferenceStore {
public:
    explicit PreferenceStore(std::filesystem::path path) : path_(std::move(path)) {}
    /// One flushed line per record.
    void append(const PreferenceRecord& record) const;
    void append(const std::vector<PreferenceRecord>& records) const;
    /// Missing file throws DataError "MissingFile"; bad line "CorruptRecord".
    static std::vector<PreferenceRecord> load(const std::filesystem::path& path);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace constructa
