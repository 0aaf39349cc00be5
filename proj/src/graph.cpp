#include "constructa/graph.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <set>

#include "json.hpp"

namespace constructa {

std::size_t ScheduleGraph::index_of(std::string_view id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw DataError("UnknownNode", "no activity '" + std::string(id) + "'");
    return it->second;
}

bool ScheduleGraph::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

ScheduleGraph build_graph(const Schedule& schedule) {
    const auto report = validate(schedule);
    if (!report.empty())
        throw DataError("InvalidSchedule", std::to_string(report.size()) + " violation(s), first: " +
                                               report.front().code + " " + report.front().message);
    ScheduleGraph g;
    g.schedule_ = std::make_shared<const Schedule>(schedule);
    const auto n = schedule.activities.size();
    g.ids_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.ids_.push_back(schedule.activities[i].id);
        g.index_.emplace(schedule.activities[i].id, i);
    }
    g.out_.resize(n);
    g.in_.resize(n);
    for (const auto& l : schedule.links) {
        const auto u = g.index_.at(l.predecessor_id);
        const auto v = g.index_.at(l.successor_id);
        g.out_[u].push_back({v, l.relation, l.lag_days});
        g.in_[v].push_back({u, l.relation, l.lag_days});
    }
    g.edge_count_ = schedule.links.size();
    auto by_id = [&](const ScheduleGraph::Edge& a, const ScheduleGraph::Edge& b) {
        return std::tie(g.ids_[a.node], a.relation) < std::tie(g.ids_[b.node], b.relation);
    };
    for (auto& e : g.out_) std::sort(e.begin(), e.end(), by_id);
    for (auto& e : g.in_) std::sort(e.begin(), e.end(), by_id);
    return g;
}

namespace {

// Tarjan's SCC, iterative to survive long chains.
std::vector<int> strongly_connected(const ScheduleGraph& g, int& count) {
    const auto n = g.node_count();
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    int next = 0;
    count = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<std::pair<std::size_t, std::size_t>> work{{root, 0}};
        while (!work.empty()) {
            auto& [v, edge] = work.back();
            if (edge == 0 && index[v] == -1) {
                index[v] = low[v] = next++;
                stack.push_back(v);
                on_stack[v] = true;
            }
            const auto& outs = g.out_edges(v);
            if (edge < outs.size()) {
                const auto w = outs[edge++].node;
                if (index[w] == -1) {
                    work.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = count;
                } while (w != v);
                ++count;
            }
            const auto done = v;
            work.pop_back();
            if (!work.empty()) low[work.back().first] = std::min(low[work.back().first], low[done]);
        }
    }
    return comp;
}

}  // namespace

std::vector<std::vector<std::string>> detect_cycles(const ScheduleGraph& graph) {
    int count = 0;
    const auto comp = strongly_connected(graph, count);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(count));
    for (std::size_t v = 0; v < graph.node_count(); ++v) members[comp[v]].push_back(v);

    std::vector<std::vector<std::string>> cycles;
    for (const auto& m : members) {
        if (m.size() < 2) continue;  // links never self-loop
        const auto start = *std::min_element(m.begin(), m.end(), [&](auto a, auto b) {
            return graph.id(a) < graph.id(b);
        });
        // BFS inside the component from start back to start gives a shortest
        // simple cycle through it.
        const int c = comp[start];
        std::vector<long> parent(graph.node_count(), -2);
        std::queue<std::size_t> q;
        q.push(start);
        parent[start] = -1;
        long closing = -1;
        while (!q.empty() && closing < 0) {
            const auto v = q.front();
            q.pop();
            for (const auto& e : graph.out_edges(v)) {
                if (comp[e.node] != c) continue;
                if (e.node == start) {
                    closing = static_cast<long>(v);
                    break;
                }
                if (parent[e.node] == -2) {
                    parent[e.node] = static_cast<long>(v);
                    q.push(e.node);
                }
            }
        }
        std::vector<std::string> cycle;
        for (long v = closing; v != -1; v = parent[static_cast<std::size_t>(v)])
            cycle.push_back(graph.id(static_cast<std::size_t>(v)));
        std::reverse(cycle.begin(), cycle.end());
        cycles.push_back(std::move(cycle));
    }
    std::sort(cycles.begin(), cycles.end());
    return cycles;
}

std::vector<std::string> topological_order(const ScheduleGraph& graph) {
    const auto n = graph.node_count();
    std::vector<std::size_t> indeg(n);
    for (std::size_t v = 0; v < n; ++v) indeg[v] = graph.in_edges(v).size();
    auto later = [&](std::size_t a, std::size_t b) { return graph.id(a) > graph.id(b); };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
    for (std::size_t v = 0; v < n; ++v)
        if (indeg[v] == 0) ready.push(v);
    std::vector<std::string> order;
    order.reserve(n);
    while (!ready.empty()) {
        const auto v = ready.top();
        ready.pop();
        order.push_back(graph.id(v));
        for (const auto& e : graph.out_edges(v))
            if (--indeg[e.node] == 0) ready.push(e.node);
    }
    if (order.size() != n) throw DataError("CyclicGraph", "graph contains a cycle");
    return order;
}

std::vector<std::size_t> node_degrees(const ScheduleGraph& graph) {
    std::vector<std::size_t> d(graph.node_count());
    for (std::size_t v = 0; v < d.size(); ++v) d[v] = graph.in_edges(v).size() + graph.out_edges(v).size();
    return d;
}

std::vector<std::size_t> maximal_hops(const ScheduleGraph& graph, HopDirection direction) {
    const auto order = topological_order(graph);
    std::vector<std::size_t> down(graph.node_count(), 0), up(graph.node_count(), 0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto v = graph.index_of(*it);
        for (const auto& e : graph.out_edges(v)) down[v] = std::max(down[v], down[e.node] + 1);
    }
    if (direction == HopDirection::Downstream) return down;
    for (const auto& id : order) {
        const auto v = graph.index_of(id);
        for (const auto& e : graph.in_edges(v)) up[v] = std::max(up[v], up[e.node] + 1);
    }
    for (std::size_t v = 0; v < down.size(); ++v) down[v] = std::max(down[v], up[v]);
    return down;
}

namespace {

void fold(const std::vector<std::size_t>& values, std::map<std::size_t, std::size_t>& hist, double& mean,
          std::size_t& max) {
    hist.clear();
    max = 0;
    std::size_t sum = 0;
    for (const auto v : values) {
        ++hist[v];
        sum += v;
        max = std::max(max, v);
    }
    mean = values.empty() ? 0.0 : static_cast<double>(sum) / static_cast<double>(values.size());
}

}  // namespace

GraphStats degree_distribution(const ScheduleGraph& graph) {
    GraphStats s;
    fold(node_degrees(graph), s.degree_histogram, s.degree_mean, s.degree_max);
    return s;
}

GraphStats maximal_hop_distribution(const ScheduleGraph& graph, HopDirection direction) {
    GraphStats s;
    fold(maximal_hops(graph, direction), s.maxhop_histogram, s.maxhop_mean, s.maxhop_max);
    return s;
}

GraphStats graph_stats(const ScheduleGraph& graph, HopDirection direction) {
    GraphStats s = degree_distribution(graph);
    const auto hops = maximal_hop_distribution(graph, direction);
    s.maxhop_histogram = hops.maxhop_histogram;
    s.maxhop_mean = hops.maxhop_mean;
    s.maxhop_max = hops.maxhop_max;
    return s;
}

std::string export_stats_records(const GraphStats& stats) {
    std::string out;
    auto emit = [&](const nlohmann::ordered_json& j) {
        out += j.dump();
        out.push_back('\n');
    };
    emit({{"metric", "degree"}, {"mean", stats.degree_mean}, {"max", stats.degree_max}});
    emit({{"metric", "maxhop"}, {"mean", stats.maxhop_mean}, {"max", stats.maxhop_max}});
    for (const auto& [v, c] : stats.degree_histogram) emit({{"metric", "degree"}, {"value", v}, {"count", c}});
    for (const auto& [v, c] : stats.maxhop_histogram) emit({{"metric", "maxhop"}, {"value", v}, {"count", c}});
    return out;
}

std::string histogram_text(const std::map<std::size_t, std::size_t>& histogram) {
    std::string out;
    for (const auto& [v, c] : histogram) out += std::to_string(v) + " " + std::to_string(c) + "\n";
    return out;
}

}  // namespace constructa
