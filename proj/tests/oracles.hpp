#pragma once

// Brute-force reference implementations used to check the library. They only
// read plain data (links, WBS paths, vectors) and never call the code under test.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "constructa/schedule.hpp"

namespace oracle {

using constructa::Schedule;

using AdjList = std::map<std::string, std::vector<std::string>>;

struct Adjacency {
    AdjList out, in;
};

inline Adjacency adjacency(const Schedule& s) {
    Adjacency a;
    for (const auto& l : s.links) {
        a.out[l.predecessor_id].push_back(l.successor_id);
        a.in[l.successor_id].push_back(l.predecessor_id);
    }
    return a;
}

inline std::size_t degree(const Adjacency& a, const std::string& id) {
    const auto o = a.out.count(id) ? a.out.at(id).size() : 0;
    const auto i = a.in.count(id) ? a.in.at(id).size() : 0;
    return o + i;
}

/// Longest path length from `v`, by walking every path.
inline std::size_t longest_path(const AdjList& adj, const std::string& v) {
    std::size_t best = 0;
    std::function<void(const std::string&, std::size_t)> walk = [&](const std::string& u, std::size_t len) {
        best = std::max(best, len);
        const auto it = adj.find(u);
        if (it == adj.end()) return;
        for (const auto& w : it->second) walk(w, len + 1);
    };
    walk(v, 0);
    return best;
}

/// Directed hop distances from `root` along out-links (forward) or in-links.
inline std::map<std::string, int> bfs(const Adjacency& a, const std::string& root, bool forward) {
    const auto& adj = forward ? a.out : a.in;
    std::map<std::string, int> dist{{root, 0}};
    std::deque<std::string> q{root};
    while (!q.empty()) {
        const auto u = q.front();
        q.pop_front();
        const auto it = adj.find(u);
        if (it == adj.end()) continue;
        for (const auto& w : it->second)
            if (!dist.count(w)) {
                dist[w] = dist[u] + 1;
                q.push_back(w);
            }
    }
    return dist;
}

inline bool has_link(const Adjacency& a, const std::string& from, const std::string& to) {
    const auto it = a.out.find(from);
    return it != a.out.end() && std::find(it->second.begin(), it->second.end(), to) != it->second.end();
}

/// Activities sharing the first max(1, depth - levels) WBS segments with target.
inline std::set<std::string> wbs_prefix_filter(const Schedule& s, const std::string& target, int levels) {
    const auto* t = s.find(target);
    const auto need = static_cast<std::size_t>(std::max<long>(1, static_cast<long>(t->wbs.size()) - levels));
    std::set<std::string> out;
    if (t->wbs.size() < need) return out;
    for (const auto& a : s.activities) {
        if (a.id == target || a.wbs.size() < need) continue;
        if (std::equal(t->wbs.begin(), t->wbs.begin() + static_cast<long>(need), a.wbs.begin())) out.insert(a.id);
    }
    return out;
}

inline std::set<std::string> raw_neighbours(const Schedule& s, const std::string& id) {
    std::set<std::string> out;
    for (const auto& l : s.links) {
        if (l.predecessor_id == id) out.insert(l.successor_id);
        if (l.successor_id == id) out.insert(l.predecessor_id);
    }
    return out;
}

struct ScanItem {
    std::string doc;
    std::size_t index;
    std::vector<double> v;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / std::sqrt(na * nb);
}

/// Full sort by similarity descending, then (doc, index); returns the first k (doc, index).
inline std::vector<std::pair<std::string, std::size_t>> exhaustive_top_k(const std::vector<ScanItem>& items,
                                                                        const std::vector<double>& q,
                                                                        std::size_t k, double tie_eps = 0.0) {
    std::vector<std::pair<double, const ScanItem*>> scored;
    for (const auto& it : items) scored.emplace_back(cosine(it.v, q), &it);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (std::abs(a.first - b.first) > tie_eps) return a.first > b.first;
        return std::tie(a.second->doc, a.second->index) < std::tie(b.second->doc, b.second->index);
    });
    std::vector<std::pair<std::string, std::size_t>> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i)
        out.emplace_back(scored[i].second->doc, scored[i].second->index);
    return out;
}

// Losses written out from their definitions.
inline double sft(const std::vector<double>& p, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += y[i] * std::log(p[i]);
    return -s / static_cast<double>(p.size());
}

inline double bce(const std::vector<double>& p, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += y[i] * std::log(p[i]) + (1 - y[i]) * std::log(1 - p[i]);
    return -s / static_cast<double>(p.size());
}

}  // namespace oracle
