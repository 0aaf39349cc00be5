#include "constructa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "constructa/util.hpp"

namespace constructa {

WeightedList GeneratorParams::default_disciplines() {
    return {{"CSA.Arch.Arch-D", 1.0},    {"CSA.Arch.CRCs-D", 1.0},    {"CSA.Arch.Metal", 1.0},
            {"CSA.Arch.RF", 1.0},        {"CSA.Arch.WPRF", 1.0},      {"CSA.Civil.Earthwork", 1.0},
            {"CSA.Struc.Concrete", 1.0}, {"CSA.Struc.Modules", 1.0},  {"CSA.Struc.Piers", 1.0},
            {"CSA.Struc.Steel", 1.0},    {"CSA.Struc.Strut", 1.0},    {"MEP.Mech.Dry", 1.0},
            {"MEP.Mech.Wet", 1.0},       {"MEP.Proc.HP", 1.0},        {"MEP.Proc.LP", 1.0},
            {"MEP.Proc.Vac", 1.0},       {"MEP.Proc.Waste", 1.0},     {"MEP.Proc.Water", 1.0}};
}

namespace {

void check_weights(const WeightedList& list, const char* what) {
    if (list.empty()) throw UsageError("InvalidParams", std::string(what) + " list is empty");
    for (const auto& [name, w] : list)
        if (name.empty() || !std::isfinite(w) || w <= 0)
            throw UsageError("InvalidParams", std::string(what) + " entry '" + name + "' needs a positive finite weight");
}

std::vector<double> weights_of(const WeightedList& list) {
    std::vector<double> w;
    for (const auto& [_, x] : list) w.push_back(x);
    return w;
}

const std::string& pick(Rng& rng, const WeightedList& list, const std::vector<double>& w) {
    return list[rng.weighted(w)].first;
}

}  // namespace

void GeneratorParams::check() const {
    if (n_activities < 1) throw UsageError("InvalidParams", "n_activities must be >= 1");
    check_weights(disciplines, "discipline");
    check_weights(levels, "level");
    check_weights(areas, "area");
    check_weights(statuses, "status");
    check_weights(relations, "relation");
    for (const auto& [l, _] : levels)
        if (!parse_level(l)) throw UsageError("InvalidParams", "unknown level '" + l + "'");
    for (const auto& [r, _] : relations)
        if (!parse_relation(r)) throw UsageError("InvalidParams", "unknown relation '" + r + "'");
    for (const auto& [d, _] : disciplines)
        for (const auto& part : split(d, '.'))
            if (part.empty()) throw UsageError("InvalidParams", "discipline '" + d + "' has an empty component");
    if (!std::isfinite(target_mean_degree) || target_mean_degree < 0)
        throw UsageError("InvalidParams", "target_mean_degree must be finite and >= 0");
    if (window < 1) throw UsageError("InvalidParams", "window must be >= 1");
    if (min_duration_days < 0 || max_duration_days < min_duration_days)
        throw UsageError("InvalidParams", "duration range is empty");
    if (!(lag_probability >= 0 && lag_probability <= 1))
        throw UsageError("InvalidParams", "lag_probability must be in [0, 1]");
    if (!parse_iso_date(project_start)) throw UsageError("InvalidParams", "project_start is not YYYY-MM-DD");
}

Schedule generate_schedule(const GeneratorParams& p) {
    p.check();
    const auto n = p.n_activities;
    if (p.target_mean_degree > static_cast<double>(n - 1))
        throw UsageError("InfeasibleParams", "mean degree " + std::to_string(p.target_mean_degree) +
                                                 " is impossible with " + std::to_string(n) + " activities");

    Rng rng(p.seed);
    const auto w_disc = weights_of(p.disciplines), w_level = weights_of(p.levels), w_area = weights_of(p.areas),
               w_status = weights_of(p.statuses), w_rel = weights_of(p.relations);

    // position -> activity index; ids are numbered independently of positions.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
    Schedule s;
    s.source_label = "synthetic:seed=" + std::to_string(p.seed);
    s.activities.resize(n);
    static const char* const kVerbs[] = {"Install", "Erect", "Inspect", "Test", "Prepare", "Set", "Connect", "Finish"};
    static const char* const kPhases[] = {"Foundation", "Structure", "Enclosure", "Fit-out"};
    static const char* const kSupers[] = {"Super-1", "Super-2", "Super-3", "Super-4", "Super-5"};
    std::vector<int> durations(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& a = s.activities[i];
        const auto digits = std::to_string(i + 1);
        a.id = "A" + std::string(width - digits.size(), '0') + digits;
        a.discipline = pick(rng, p.disciplines, w_disc);
        a.level = *parse_level(pick(rng, p.levels, w_level));
        a.area = pick(rng, p.areas, w_area);
        a.status = pick(rng, p.statuses, w_status);
        a.zone = "Z" + std::to_string(1 + rng.below(4));
        auto disc_segment = a.discipline;
        std::replace(disc_segment.begin(), disc_segment.end(), '.', '-');
        a.wbs = {"FAB", a.area, disc_segment};
        const auto parts = split(a.discipline, '.');
        a.name = std::string(kVerbs[rng.below(std::size(kVerbs))]) + " " + parts.back() + " " + a.area + " " +
                 std::string(to_string(a.level));
        a.extra_attributes["Subcontractor"] = parts.front() + "-" + parts[parts.size() > 1 ? 1 : 0] + " Sub";
        a.extra_attributes["Superintendent"] = kSupers[rng.below(std::size(kSupers))];
        durations[i] = p.min_duration_days +
                       static_cast<int>(rng.below(static_cast<std::uint64_t>(p.max_duration_days - p.min_duration_days + 1)));
    }

    // Forward links within the window.
    std::vector<std::vector<std::size_t>> preds_of(n);  // by position, link indices
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t room = std::min(p.window, n - 1 - pos);
        if (room == 0) continue;
        const std::size_t k = std::min<std::size_t>(rng.poisson(p.target_mean_degree / 2.0), room);
        std::vector<std::size_t> offsets(room);
        for (std::size_t j = 0; j < room; ++j) offsets[j] = j + 1;
        for (std::size_t j = 0; j < k; ++j) std::swap(offsets[j], offsets[j + rng.below(room - j)]);
        std::sort(offsets.begin(), offsets.begin() + static_cast<long>(k));
        for (std::size_t j = 0; j < k; ++j) {
            const auto succ_pos = pos + offsets[j];
            DependencyLink l;
            l.predecessor_id = s.activities[order[pos]].id;
            l.successor_id = s.activities[order[succ_pos]].id;
            l.relation = *parse_relation(pick(rng, p.relations, w_rel));
            l.lag_days = rng.uniform01() < p.lag_probability ? 1 + static_cast<int>(rng.below(5)) : 0;
            preds_of[succ_pos].push_back(s.links.size());
            s.links.push_back(std::move(l));
        }
    }

    // Dates in position order: every predecessor is placed first.
    const auto start = *parse_iso_date(p.project_start);
    std::vector<Date> starts(n), finishes(n);  // by activity index
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[s.activities[i].id] = i;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const auto ai = order[pos];
        const auto dur = std::chrono::days(durations[ai]);
        Date st = start;
        Date need_finish = start;
        for (const auto li : preds_of[pos]) {
            const auto& l = s.links[li];
            const auto pi = index.at(l.predecessor_id);
            const auto lag = std::chrono::days(l.lag_days);
            switch (l.relation) {
                case Relation::FS: st = std::max(st, finishes[pi] + lag); break;
                case Relation::SS: st = std::max(st, starts[pi] + lag); break;
                case Relation::FF: need_finish = std::max(need_finish, finishes[pi] + lag); break;
                case Relation::SF: need_finish = std::max(need_finish, starts[pi] + lag); break;
            }
        }
        st = std::max(st, need_finish - dur);
        starts[ai] = st;
        finishes[ai] = st + dur;
        s.activities[ai].extra_attributes["Project Phase"] = kPhases[std::min<std::size_t>(3, pos * 4 / n)];
    }
    for (std::size_t i = 0; i < n; ++i) {
        s.activities[i].start = starts[i];
        s.activities[i].finish = finishes[i];
    }
    std::sort(s.links.begin(), s.links.end(), [](const auto& a, const auto& b) {
        return std::tie(a.predecessor_id, a.successor_id) < std::tie(b.predecessor_id, b.successor_id);
    });
    return s;
}

// ---- attribute matrices --------------------------------------------------------------

const std::vector<std::string>& default_matrix_attributes() {
    static const std::vector<std::string> cols{std::string(column::kStatus), std::string(column::kDiscipline),
                                               std::string(column::kLevel),  std::string(column::kArea),
                                               std::string(column::kZone),   std::string(column::kStart),
                                               std::string(column::kFinish)};
    return cols;
}

namespace {

std::vector<std::vector<std::string>> columns_of(const Schedule& schedule, const std::vector<std::string>& attributes) {
    const auto rows = to_rows(schedule);
    std::vector<std::vector<std::string>> cols(attributes.size());
    for (std::size_t a = 0; a < attributes.size(); ++a) {
        for (const auto& row : rows) {
            const auto it = std::find_if(row.begin(), row.end(), [&](const auto& kv) { return kv.first == attributes[a]; });
            if (it == row.end()) throw DataError("UnknownAttribute", "no column '" + attributes[a] + "'");
            cols[a].push_back(it->second);
        }
        if (rows.empty() && std::find(canonical_columns().begin(), canonical_columns().end(), attributes[a]) ==
                                canonical_columns().end())
            throw DataError("UnknownAttribute", "no column '" + attributes[a] + "'");
    }
    return cols;
}

std::vector<double> encode(const std::string& column, const std::vector<std::string>& values) {
    std::vector<double> out;
    if (column == column::kStart || column == column::kFinish) {
        bool all_dates = true;
        for (const auto& v : values) {
            const auto d = parse_iso_date(v);
            if (!d) {
                all_dates = false;
                break;
            }
            out.push_back(static_cast<double>(d->time_since_epoch().count()));
        }
        if (all_dates) return out;
        out.clear();
    }
    std::map<std::string, double> codes;
    for (const auto& v : values) {
        const auto [it, _] = codes.emplace(v, static_cast<double>(codes.size()));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace

AttributeMatrix pearson_matrix(const Schedule& schedule, const std::vector<std::string>& attributes) {
    if (schedule.activities.size() < 2)
        throw DataError("TooFewRows", "Pearson correlation needs at least 2 rows, got " +
                                          std::to_string(schedule.activities.size()));
    const auto cols = columns_of(schedule, attributes);
    const auto m = attributes.size();
    const double n = static_cast<double>(schedule.activities.size());

    std::vector<std::vector<double>> centered(m);
    std::vector<double> norms(m);
    AttributeMatrix out;
    out.kind = MatrixKind::Pearson;
    out.labels = attributes;
    out.constant.assign(m, false);
    for (std::size_t a = 0; a < m; ++a) {
        auto x = encode(attributes[a], cols[a]);
        double mean = 0;
        for (const auto v : x) mean += v;
        mean /= n;
        double ss = 0;
        for (auto& v : x) {
            v -= mean;
            ss += v * v;
        }
        centered[a] = std::move(x);
        norms[a] = std::sqrt(ss);
        out.constant[a] = ss == 0.0;
    }
    out.values.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
        out.values[a][a] = 1.0;
        for (std::size_t b = a + 1; b < m; ++b) {
            double r = 0.0;
            if (!out.constant[a] && !out.constant[b]) {
                double dot = 0;
                for (std::size_t i = 0; i < centered[a].size(); ++i) dot += centered[a][i] * centered[b][i];
                r = std::clamp(dot / (norms[a] * norms[b]), -1.0, 1.0);
            }
            out.values[a][b] = out.values[b][a] = r;
        }
    }
    return out;
}

AttributeMatrix cosine_matrix(const Schedule& schedule, const std::vector<std::string>& attributes,
                              const Embedder& embedder) {
    const auto cols = columns_of(schedule, attributes);
    const auto m = attributes.size();
    std::vector<EmbeddingVector> emb;
    for (std::size_t a = 0; a < m; ++a) {
        std::vector<std::string> distinct;
        std::set<std::string> seen;
        for (const auto& v : cols[a])
            if (!trim(v).empty() && seen.insert(v).second) distinct.push_back(v);
        if (distinct.empty()) throw DataError("EmptyColumn", "column '" + attributes[a] + "' has no values");
        emb.push_back(embedder.embed(attributes[a] + " " + join(distinct, " ")));
    }
    AttributeMatrix out;
    out.kind = MatrixKind::Cosine;
    out.labels = attributes;
    out.constant.assign(m, false);
    out.values.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
        out.values[a][a] = 1.0;
        for (std::size_t b = a + 1; b < m; ++b) out.values[a][b] = out.values[b][a] = cosine_similarity(emb[a], emb[b]);
    }
    return out;
}

std::string AttributeMatrix::to_text() const {
    std::string out = kind == MatrixKind::Pearson ? "pearson" : "cosine";
    for (const auto& l : labels) out += "\t" + l;
    out += "\n";
    char buf[32];
    for (std::size_t a = 0; a < labels.size(); ++a) {
        out += labels[a];
        for (const auto v : values[a]) {
            std::snprintf(buf, sizeof buf, "\t%.6f", v);
            out += buf;
        }
        if (kind == MatrixKind::Pearson && constant[a]) out += "\tconstant";
        out += "\n";
    }
    return out;
}

}  // namespace constructa
