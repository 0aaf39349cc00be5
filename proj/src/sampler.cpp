#include "constructa/sampler.hpp"

#include <algorithm>

#include "json.hpp"

namespace constructa {

void SamplerConfig::check() const {
    if (max_sequential_hops < 0 || max_wbs_levels < 0 || paths_per_direction < 0)
        throw UsageError("InvalidSamplerConfig", "sampler counts must be non-negative");
    if (max_sequential_hops > 16)
        throw UsageError("InvalidSamplerConfig", "max_sequential_hops is capped at 16");
}

std::set<std::string> first_order(const ScheduleGraph& graph, std::string_view target) {
    const auto v = graph.index_of(target);
    std::set<std::string> out;
    for (const auto& e : graph.in_edges(v)) out.insert(graph.id(e.node));
    for (const auto& e : graph.out_edges(v)) out.insert(graph.id(e.node));
    return out;
}

std::set<SequentialPath> sample_sequential(const ScheduleGraph& graph, std::string_view target,
                                           const SamplerConfig& cfg, Rng& rng) {
    cfg.check();
    const auto root = graph.index_of(target);
    std::set<SequentialPath> paths;
    for (const auto dir : {PathDirection::Forward, PathDirection::Backward}) {
        for (int t = 0; t < cfg.paths_per_direction; ++t) {
            std::vector<std::size_t> walk{root};
            std::vector<std::size_t> candidates;
            while (static_cast<int>(walk.size()) - 1 < cfg.max_sequential_hops) {
                const auto& edges = dir == PathDirection::Forward ? graph.out_edges(walk.back())
                                                                  : graph.in_edges(walk.back());
                candidates.clear();
                for (const auto& e : edges)
                    if (std::find(walk.begin(), walk.end(), e.node) == walk.end() &&
                        std::find(candidates.begin(), candidates.end(), e.node) == candidates.end())
                        candidates.push_back(e.node);
                if (candidates.empty()) break;
                walk.push_back(candidates[rng.below(candidates.size())]);
            }
            if (walk.size() < 2) break;  // dead end at the root: every walk is empty
            SequentialPath p{dir, {}};
            for (const auto v : walk) p.nodes.push_back(graph.id(v));
            paths.insert(std::move(p));
        }
    }
    return paths;
}

std::set<SequentialPath> sample_sequential(const ScheduleGraph& graph, std::string_view target,
                                           const SamplerConfig& cfg) {
    Rng rng = Rng::stream(cfg.rng_seed, target);
    return sample_sequential(graph, target, cfg, rng);
}

std::set<std::string> sample_hierarchical(const Schedule& schedule, std::string_view target,
                                          const SamplerConfig& cfg) {
    cfg.check();
    const Activity* t = schedule.find(target);
    if (!t) throw DataError("UnknownNode", "no activity '" + std::string(target) + "'");
    const long depth = static_cast<long>(t->wbs.size());
    const auto need = static_cast<std::size_t>(std::max<long>(1, depth - cfg.max_wbs_levels));
    std::set<std::string> out;
    for (const auto& a : schedule.activities) {
        if (a.id == t->id) continue;
        std::size_t common = 0;
        while (common < a.wbs.size() && common < t->wbs.size() && a.wbs[common] == t->wbs[common]) ++common;
        if (common >= need) out.insert(a.id);
    }
    return out;
}

ContextBundle combined_context(const ScheduleGraph& graph, const Schedule& schedule,
                               std::string_view target, const SamplerConfig& cfg) {
    if (!schedule.find(target)) throw DataError("UnknownNode", "no activity '" + std::string(target) + "'");
    ContextBundle b;
    b.target = std::string(target);
    b.first_order = first_order(graph, target);
    b.hierarchical = sample_hierarchical(schedule, target, cfg);
    b.sequential = sample_sequential(graph, target, cfg);
    b.sampled_at_seed = cfg.rng_seed;
    return b;
}

namespace {

std::string link_role(const Schedule& schedule, const std::string& target, const std::string& other) {
    std::vector<std::string> roles;
    for (const auto& l : schedule.links) {
        LinkCellEntry e{{}, l.relation, l.lag_days};
        if (l.predecessor_id == other && l.successor_id == target)
            roles.push_back("predecessor " + format_link_entry(e).substr(1));
        else if (l.predecessor_id == target && l.successor_id == other)
            roles.push_back("successor " + format_link_entry(e).substr(1));
    }
    std::sort(roles.begin(), roles.end());
    return roles.empty() ? "related" : join(roles, ", ");
}

std::string wbs_role(const Activity* t, const Activity& a) {
    std::size_t common = 0;
    while (common < a.wbs.size() && common < t->wbs.size() && a.wbs[common] == t->wbs[common]) ++common;
    return "wbs shared " + std::to_string(common) + " of " + std::to_string(t->wbs.size());
}

std::string row(const Activity& a, const std::string& role) {
    return a.id + " | " + a.name + " | " + format_date(a.start) + " | " + format_date(a.finish) + " | " + role;
}

}  // namespace

std::string render_context(const ContextBundle& bundle, const Schedule& schedule) {
    const Activity* t = schedule.find(bundle.target);
    std::string out = "TARGET: " + bundle.target + "\nSEED: " + std::to_string(bundle.sampled_at_seed) + "\n";
    out += "FIRST-ORDER:\n";
    for (const auto& id : bundle.first_order)
        if (const Activity* a = schedule.find(id)) out += row(*a, link_role(schedule, bundle.target, id)) + "\n";
    out += "HIERARCHICAL:\n";
    for (const auto& id : bundle.hierarchical)
        if (const Activity* a = schedule.find(id)) out += row(*a, t ? wbs_role(t, *a) : "wbs") + "\n";
    out += "SEQUENTIAL:\n";
    for (const auto& p : bundle.sequential) {
        if (p.direction == PathDirection::Forward) {
            out += join(p.nodes, " -> ");
        } else {
            std::vector<std::string> rev(p.nodes.rbegin(), p.nodes.rend());
            out += join(rev, " -> ");
        }
        out += "\n";
    }
    return out;
}

std::string bundle_to_record(const ContextBundle& b) {
    nlohmann::ordered_json j;
    j["target"] = b.target;
    j["seed"] = b.sampled_at_seed;
    j["first_order"] = b.first_order;
    j["hierarchical"] = b.hierarchical;
    auto seq = nlohmann::ordered_json::array();
    for (const auto& p : b.sequential)
        seq.push_back({{"direction", p.direction == PathDirection::Forward ? "forward" : "backward"},
                       {"nodes", p.nodes}});
    j["sequential"] = std::move(seq);
    return j.dump();
}

ContextBundle bundle_from_record(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        ContextBundle b;
        b.target = j.at("target").get<std::string>();
        b.sampled_at_seed = j.at("seed").get<std::uint64_t>();
        b.first_order = j.at("first_order").get<std::set<std::string>>();
        b.hierarchical = j.at("hierarchical").get<std::set<std::string>>();
        for (const auto& p : j.at("sequential")) {
            const auto dir = p.at("direction").get<std::string>();
            if (dir != "forward" && dir != "backward") throw DataError("CorruptRecord", "bad direction");
            b.sequential.insert({dir == "forward" ? PathDirection::Forward : PathDirection::Backward,
                                 p.at("nodes").get<std::vector<std::string>>()});
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("CorruptRecord", e.what());
    }
}

}  // namespace constructa
