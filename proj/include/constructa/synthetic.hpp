#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "constructa/knowledge.hpp"
#include "constructa/schedule.hpp"

namespace constructa {

using WeightedList = std::vector<std::pair<std::string, double>>;

struct GeneratorParams {
    std::size_t n_activities = 100;
    WeightedList disciplines = default_disciplines();
    WeightedList levels = {{"EQ", 1.0}, {"UL", 1.0}, {"SF", 1.0}, {"RF", 1.0}};
    WeightedList areas = {{"6E", 1.0}, {"9E", 1.0}, {"SU", 1.0}, {"10E", 1.0}};
    WeightedList statuses = {{"Completed", 3.0}, {"In Progress", 2.0}, {"Not Started", 5.0}};
    /// FS, SS, FF, SF
    WeightedList relations = {{"FS", 80.0}, {"SS", 10.0}, {"FF", 8.0}, {"SF", 2.0}};
    double target_mean_degree = 3.86;
    std::size_t window = 20;  // successors are drawn from the next `window` positions
    int min_duration_days = 1;
    int max_duration_days = 20;
    double lag_probability = 0.1;  // chance that a link carries a 1-5 day lag
    std::uint64_t seed = 42;
    std::string project_start = "2024-01-02";

    static WeightedList default_disciplines();

    /// Throws UsageError "InvalidParams".
    void check() const;
};

/// Seeded synthetic schedule. Links only point forward in a hidden random
/// order, so the graph is acyclic; dates honour every link and its lag.
/// Throws UsageError "InfeasibleParams" when the target degree exceeds n - 1.
Schedule generate_schedule(const GeneratorParams& params);

enum class MatrixKind { Pearson, Cosine };

struct AttributeMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;
    MatrixKind kind = MatrixKind::Pearson;
    /// Pearson only: columns with a single distinct value. Their diagonal is
    /// set to 1 and their off-diagonal entries to 0.
    std::vector<bool> constant;

    /// Tab-separated square table with a header row.
    std::string to_text() const;
};

/// Categorical columns are coded by first appearance; date columns use day numbers.
/// Throws DataError "TooFewRows" or "UnknownAttribute".
AttributeMatrix pearson_matrix(const Schedule& schedule, const std::vector<std::string>& attributes);

/// Each attribute is embedded as its name followed by its distinct values.
/// Throws DataError "EmptyColumn" or "UnknownAttribute".
AttributeMatrix cosine_matrix(const Schedule& schedule, const std::vector<std::string>& attributes,
                              const Embedder& embedder);

/// Attributes analysed by default: the categorical and date columns.
const std::vector<std::string>& default_matrix_attributes();

}  // namespace constructa
