#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "constructa/error.hpp"
#include "constructa/util.hpp"

namespace constructa {

enum class Relation { FS, SS, FF, SF };
enum class Level { EQ, UL, SF, RF };

std::string_view to_string(Relation r) noexcept;
std::string_view to_string(Level l) noexcept;
std::optional<Relation> parse_relation(std::string_view s) noexcept;
std::optional<Level> parse_level(std::string_view s) noexcept;

/// Canonical column names of the tabular schedule.
namespace column {
inline constexpr std::string_view kId = "Activity ID";
inline constexpr std::string_view kName = "Activity Name";
inline constexpr std::string_view kStatus = "Activity Status";
inline constexpr std::string_view kWbs = "WBS";
inline constexpr std::string_view kDiscipline = "Discipline";
inline constexpr std::string_view kLevel = "Level";
inline constexpr std::string_view kArea = "Area";
inline constexpr std::string_view kZone = "Zone";
inline constexpr std::string_view kStart = "Current Start";
inline constexpr std::string_view kFinish = "Current Finish";
inline constexpr std::string_view kPredecessors = "Predecessor Details";
inline constexpr std::string_view kSuccessors = "Successor Details";
}  // namespace column

/// The fixed leading column order of the canonical serialization.
const std::vector<std::string>& canonical_columns();

struct Activity {
    std::string id;
    std::string name;
    std::string status;
    std::vector<std::string> wbs;
    std::string discipline;
    Level level = Level::SF;
    std::string area;
    std::optional<std::string> zone;
    Date start{};
    Date finish{};
    std::map<std::string, std::string> extra_attributes;

    bool operator==(const Activity&) const = default;
};

struct DependencyLink {
    std::string predecessor_id;
    std::string successor_id;
    Relation relation = Relation::FS;
    int lag_days = 0;

    bool operator==(const DependencyLink&) const = default;
};

struct Schedule {
    std::vector<Activity> activities;
    std::vector<DependencyLink> links;
    std::string source_label;

    bool operator==(const Schedule&) const = default;

    const Activity* find(std::string_view id) const;
    std::optional<std::size_t> index_of(std::string_view id) const;
};

/// Maps logical fields onto header names. Name and zone are optional columns.
struct ColumnMap {
    std::string id{column::kId};
    std::string name{column::kName};
    std::string status{column::kStatus};
    std::string wbs{column::kWbs};
    std::string discipline{column::kDiscipline};
    std::string level{column::kLevel};
    std::string area{column::kArea};
    std::string zone{column::kZone};
    std::string start{column::kStart};
    std::string finish{column::kFinish};
    std::string predecessors{column::kPredecessors};
    std::string successors{column::kSuccessors};
};

/// One cell entry of a dependency column: `<id>[:<REL>[+<lag>|-<lag>]]`.
struct LinkCellEntry {
    std::string other_id;
    Relation relation = Relation::FS;
    int lag_days = 0;

    bool operator==(const LinkCellEntry&) const = default;
};

/// Parses a semicolon-separated dependency cell. Throws DataError
/// "InvalidLinkCell" for unknown relations or non-integer lags.
std::vector<LinkCellEntry> parse_link_cell(std::string_view cell);
std::string format_link_entry(const LinkCellEntry& e);

struct Violation {
    std::size_t row = 0;  // 1-based data row; 0 when not attributable
    std::string field;
    std::string code;     // DuplicateId, DanglingReference, MalformedDate, ...
    std::string message;

    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

/// Parses comma- or tab-separated text (delimiter auto-detected from the
/// header row). Throws DataError with codes MissingColumn, MalformedDate,
/// DanglingReference, DuplicateId, InvalidField, InvalidLinkCell,
/// ConflictingLink.
Schedule parse_schedule(std::string_view text, const ColumnMap& columns = {},
                        std::string source_label = {});

/// All invariant violations, sorted by (row, field). Pure.
ValidationReport validate(const Schedule& schedule);

/// finish - start in days.
long duration_days(const Activity& activity);

/// Row view in canonical column order (canonical columns, then extras sorted).
using Row = std::vector<std::pair<std::string, std::string>>;
std::vector<Row> to_rows(const Schedule& schedule);

/// Canonical comma-separated serialization; re-parsing yields an equal Schedule.
std::string serialize_schedule(const Schedule& schedule);
/// One JSON object per activity per line.
std::string export_activity_records(const Schedule& schedule);

}  // namespace constructa
