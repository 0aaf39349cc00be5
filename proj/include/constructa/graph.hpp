#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "constructa/schedule.hpp"

namespace constructa {

/// Directed dependency graph over the activities of a Schedule.
/// Nodes are indexed in schedule order; adjacency lists are sorted by the
/// neighbour's activity id.
class ScheduleGraph {
public:
    struct Edge {
        std::size_t node;  // the other endpoint
        Relation relation;
        int lag_days;
    };

    std::size_t node_count() const noexcept { return ids_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }

    const std::string& id(std::size_t node) const { return ids_.at(node); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    /// Throws DataError "UnknownNode".
    std::size_t index_of(std::string_view id) const;
    bool contains(std::string_view id) const;

    const std::vector<Edge>& out_edges(std::size_t node) const { return out_.at(node); }
    const std::vector<Edge>& in_edges(std::size_t node) const { return in_.at(node); }

    const Activity& payload(std::size_t node) const { return schedule_->activities.at(node); }
    const Schedule& schedule() const noexcept { return *schedule_; }

private:
    friend ScheduleGraph build_graph(const Schedule& schedule);

    std::shared_ptr<const Schedule> schedule_;
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::vector<std::vector<Edge>> out_;
    std::vector<std::vector<Edge>> in_;
    std::size_t edge_count_ = 0;
};

/// One node per activity, one edge per link (predecessor -> successor).
/// Throws DataError "InvalidSchedule" if validate() reports anything.
ScheduleGraph build_graph(const Schedule& schedule);

/// One representative elementary cycle per strongly connected component that
/// contains a cycle, rotated to start at its smallest id; list sorted.
/// Empty iff the graph is a DAG.
std::vector<std::vector<std::string>> detect_cycles(const ScheduleGraph& graph);

/// Kahn's algorithm, ties broken by ascending activity id.
/// Throws DataError "CyclicGraph".
std::vector<std::string> topological_order(const ScheduleGraph& graph);

enum class HopDirection { Downstream, Both };

/// in-degree + out-degree per node, in node order.
std::vector<std::size_t> node_degrees(const ScheduleGraph& graph);
/// Longest directed path length (edges) from each node to any reachable
/// dependent; with Both, the max of the downstream and upstream values.
/// Throws DataError "CyclicGraph".
std::vector<std::size_t> maximal_hops(const ScheduleGraph& graph,
                                      HopDirection direction = HopDirection::Downstream);

struct GraphStats {
    std::map<std::size_t, std::size_t> degree_histogram;
    double degree_mean = 0.0;
    std::size_t degree_max = 0;
    std::map<std::size_t, std::size_t> maxhop_histogram;
    double maxhop_mean = 0.0;
    std::size_t maxhop_max = 0;
};

GraphStats degree_distribution(const ScheduleGraph& graph);
GraphStats maximal_hop_distribution(const ScheduleGraph& graph,
                                    HopDirection direction = HopDirection::Downstream);
/// Both halves populated.
GraphStats graph_stats(const ScheduleGraph& graph, HopDirection direction = HopDirection::Downstream);

/// Line-delimited report: one JSON record for the summary of each metric,
/// then one per histogram bucket.
std::string export_stats_records(const GraphStats& stats);
/// Two-column "value count" text, one bucket per line, ascending value.
std::string histogram_text(const std::map<std::size_t, std::size_t>& histogram);

}  // namespace constructa
