#pragma once

#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "constructa/schedule.hpp"
#include "constructa/util.hpp"

namespace fixtures {

using namespace constructa;

inline Date day(int offset) {
    return std::chrono::sys_days{std::chrono::year{2024} / 1 / 1} + std::chrono::days{offset};
}

inline Activity activity(std::string id, std::vector<std::string> wbs = {"FAB", "6E", "Steel"}) {
    Activity a;
    a.id = std::move(id);
    a.name = "Work " + a.id;
    a.status = "Not Started";
    a.wbs = std::move(wbs);
    a.discipline = "CSA.Struc.Steel";
    a.level = Level::SF;
    a.area = "6E";
    a.start = day(0);
    a.finish = day(1);
    return a;
}

inline DependencyLink link(std::string from, std::string to, Relation r = Relation::FS, int lag = 0) {
    return {std::move(from), std::move(to), r, lag};
}

/// Activities named by `ids`, FS links from `edges`.
inline Schedule make_schedule(const std::vector<std::string>& ids,
                              const std::vector<std::pair<std::string, std::string>>& edges) {
    Schedule s;
    for (const auto& id : ids) s.activities.push_back(activity(id));
    for (const auto& [a, b] : edges) s.links.push_back(link(a, b));
    return s;
}

/// A -> B -> C
inline Schedule chain() { return make_schedule({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}}); }

/// Random DAG: edges only go forward in a shuffled order, each with
/// probability p; WBS paths of depth 1..4 over a tiny alphabet so that
/// prefixes collide often.
inline Schedule random_dag(std::uint64_t seed, std::size_t n, double p) {
    std::mt19937_64 gen(seed * 7919 + 17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen);
    Schedule s;
    const char* seg[] = {"X", "Y", "Z"};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> wbs;
        const auto depth = 1 + gen() % 4;
        for (std::size_t d = 0; d < depth; ++d) wbs.emplace_back(seg[gen() % 3]);
        s.activities.push_back(activity("N" + std::to_string(i), wbs));
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (u(gen) < p) s.links.push_back(link("N" + std::to_string(order[a]), "N" + std::to_string(order[b])));
    return s;
}

/// Fresh empty directory under the test working directory.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::current_path() / ("tmp_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::filesystem::path source_dir() { return CONSTRUCTA_SOURCE_DIR; }

}  // namespace fixtures
