#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "constructa/graph.hpp"
#include "constructa/util.hpp"

namespace constructa {

struct SamplerConfig {
    int max_sequential_hops = 3;
    int max_wbs_levels = 2;
    int paths_per_direction = 5;
    std::uint64_t rng_seed = 42;

    /// Throws UsageError "InvalidSamplerConfig".
    void check() const;
};

enum class PathDirection { Forward, Backward };

/// A walk rooted at the target. Forward walks follow out-edges; backward
/// walks follow in-edges, so nodes[1] is a predecessor of nodes[0].
struct SequentialPath {
    PathDirection direction = PathDirection::Forward;
    std::vector<std::string> nodes;

    auto operator<=>(const SequentialPath&) const = default;
};

struct ContextBundle {
    std::string target;
    std::set<std::string> first_order;
    std::set<std::string> hierarchical;
    std::set<SequentialPath> sequential;
    std::uint64_t sampled_at_seed = 0;

    bool operator==(const ContextBundle&) const = default;
};

/// Union of in- and out-neighbours of target.
std::set<std::string> first_order(const ScheduleGraph& graph, std::string_view target);

/// Up to paths_per_direction random simple walks per direction, each at most
/// max_sequential_hops edges. Each step picks uniformly among unvisited
/// neighbours; duplicate walks collapse.
std::set<SequentialPath> sample_sequential(const ScheduleGraph& graph, std::string_view target,
                                           const SamplerConfig& cfg, Rng& rng);
/// Same, with the RNG stream derived from (cfg.rng_seed, target).
std::set<SequentialPath> sample_sequential(const ScheduleGraph& graph, std::string_view target,
                                           const SamplerConfig& cfg);

/// Activities (other than target) whose WBS shares a prefix with the
/// target's of length >= max(1, depth - max_wbs_levels).
std::set<std::string> sample_hierarchical(const Schedule& schedule, std::string_view target,
                                          const SamplerConfig& cfg);

ContextBundle combined_context(const ScheduleGraph& graph, const Schedule& schedule,
                               std::string_view target, const SamplerConfig& cfg);

/// Labelled FIRST-ORDER / HIERARCHICAL / SEQUENTIAL block.
std::string render_context(const ContextBundle& bundle, const Schedule& schedule);

/// One-line JSON record and its inverse (throws DataError "CorruptRecord").
std::string bundle_to_record(const ContextBundle& bundle);
ContextBundle bundle_from_record(std::string_view line);

}  // namespace constructa
