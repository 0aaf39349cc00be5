#include "constructa/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace constructa {

std::string_view to_string(Relation r) noexcept {
    switch (r) {
        case Relation::FS: return "FS";
        case Relation::SS: return "SS";
        case Relation::FF: return "FF";
        case Relation::SF: return "SF";
    }
    return "FS";
}

std::string_view to_string(Level l) noexcept {
    switch (l) {
        case Level::EQ: return "EQ";
        case Level::UL: return "UL";
        case Level::SF: return "SF";
        case Level::RF: return "RF";
    }
    return "SF";
}

std::optional<Relation> parse_relation(std::string_view s) noexcept {
    if (s == "FS") return Relation::FS;
    if (s == "SS") return Relation::SS;
    if (s == "FF") return Relation::FF;
    if (s == "SF") return Relation::SF;
    return std::nullopt;
}

std::optional<Level> parse_level(std::string_view s) noexcept {
    if (s == "EQ") return Level::EQ;
    if (s == "UL") return Level::UL;
    if (s == "SF") return Level::SF;
    if (s == "RF") return Level::RF;
    return std::nullopt;
}

const std::vector<std::string>& canonical_columns() {
    static const std::vector<std::string> cols{
        std::string(column::kId),         std::string(column::kName),
        std::string(column::kStatus),     std::string(column::kWbs),
        std::string(column::kDiscipline), std::string(column::kLevel),
        std::string(column::kArea),       std::string(column::kZone),
        std::string(column::kStart),      std::string(column::kFinish),
        std::string(column::kPredecessors), std::string(column::kSuccessors)};
    return cols;
}

const Activity* Schedule::find(std::string_view id) const {
    for (const auto& a : activities)
        if (a.id == id) return &a;
    return nullptr;
}

std::optional<std::size_t> Schedule::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < activities.size(); ++i)
        if (activities[i].id == id) return i;
    return std::nullopt;
}

// ---- dependency cells -------------------------------------------------------

std::vector<LinkCellEntry> parse_link_cell(std::string_view cell) {
    std::vector<LinkCellEntry> out;
    if (trim(cell).empty()) return out;
    for (const auto& raw : split(cell, ';')) {
        const auto item = trim(raw);
        if (item.empty()) continue;
        LinkCellEntry e;
        const auto colon = item.find(':');
        e.other_id = std::string(trim(item.substr(0, colon)));
        if (e.other_id.empty())
            throw DataError("InvalidLinkCell", "empty activity reference in '" + std::string(cell) + "'");
        if (colon != std::string_view::npos) {
            const auto spec = trim(item.substr(colon + 1));
            const auto sign = spec.find_first_of("+-");
            const auto rel = parse_relation(trim(spec.substr(0, sign)));
            if (!rel)
                throw DataError("InvalidLinkCell", "unknown relation in '" + std::string(item) + "'");
            e.relation = *rel;
            if (sign != std::string_view::npos) {
                const auto digits = spec.substr(sign + 1);
                int lag = 0;
                const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), lag);
                if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size())
                    throw DataError("InvalidLinkCell", "lag is not an integer in '" + std::string(item) + "'");
                e.lag_days = spec[sign] == '-' ? -lag : lag;
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string format_link_entry(const LinkCellEntry& e) {
    std::string s = e.other_id + ":" + std::string(to_string(e.relation));
    if (e.lag_days > 0) s += "+" + std::to_string(e.lag_days);
    if (e.lag_days < 0) s += std::to_string(e.lag_days);
    return s;
}

// ---- delimited text ---------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_records(std::string_view text, char delim) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            any = true;
        } else if (c == delim) {
            fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                fields.push_back(std::move(field));
                records.push_back(std::move(fields));
            }
            fields.clear();
            field.clear();
            any = false;
        } else {
            field.push_back(c);
            any = true;
        }
    }
    if (any || !field.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    return records;
}

std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

using LinkKey = std::tuple<std::string, std::string, Relation>;

}  // namespace

Schedule parse_schedule(std::string_view text, const ColumnMap& columns, std::string source_label) {
    const auto first_nl = text.find('\n');
    const auto header_line = text.substr(0, first_nl);
    const auto tabs = std::count(header_line.begin(), header_line.end(), '\t');
    const auto commas = std::count(header_line.begin(), header_line.end(), ',');
    const char delim = tabs > commas ? '\t' : ',';

    auto records = read_records(text, delim);
    if (records.empty()) throw DataError("MissingColumn", "no header row");
    const auto& header = records.front();

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < header.size(); ++i) pos.emplace(std::string(trim(header[i])), i);

    auto require = [&](const std::string& name) {
        const auto it = pos.find(name);
        if (it == pos.end()) throw DataError("MissingColumn", "missing column '" + name + "'");
        return it->second;
    };
    auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = pos.find(name);
        if (it == pos.end()) return std::nullopt;
        return it->second;
    };

    const auto c_id = require(columns.id);
    const auto c_start = require(columns.start);
    const auto c_finish = require(columns.finish);
    const auto c_status = require(columns.status);
    const auto c_wbs = require(columns.wbs);
    const auto c_disc = require(columns.discipline);
    const auto c_level = require(columns.level);
    const auto c_area = require(columns.area);
    const auto c_pred = require(columns.predecessors);
    const auto c_succ = require(columns.successors);
    const auto c_name = optional_col(columns.name);
    const auto c_zone = optional_col(columns.zone);

    std::set<std::size_t> known{c_id, c_start, c_finish, c_status, c_wbs, c_disc,
                                c_level, c_area, c_pred, c_succ};
    if (c_name) known.insert(*c_name);
    if (c_zone) known.insert(*c_zone);

    Schedule schedule;
    schedule.source_label = std::move(source_label);
    std::map<LinkKey, int> link_lags;
    std::vector<LinkKey> link_order;

    auto add_link = [&](std::string pred, std::string succ, Relation rel, int lag, std::size_t row) {
        LinkKey key{pred, succ, rel};
        const auto [it, inserted] = link_lags.emplace(key, lag);
        if (inserted) {
            link_order.push_back(std::move(key));
        } else if (it->second != lag) {
            throw DataError("ConflictingLink", "row " + std::to_string(row) + ": link " + pred + "->" +
                                                   succ + " declared with different lags");
        }
    };

    for (std::size_t r = 1; r < records.size(); ++r) {
        auto rec = records[r];
        rec.resize(std::max(rec.size(), header.size()));
        auto cell = [&](std::size_t c) { return std::string(trim(rec[c])); };
        const std::size_t row = r;

        Activity a;
        a.id = cell(c_id);
        a.name = c_name ? cell(*c_name) : std::string{};
        a.status = cell(c_status);
        const auto wbs = cell(c_wbs);
        a.wbs = wbs.empty() ? std::vector<std::string>{} : split(wbs, '.');
        a.discipline = cell(c_disc);
        const auto level = parse_level(cell(c_level));
        if (!level)
            throw DataError("InvalidField", "row " + std::to_string(row) + ", " + columns.level +
                                                ": unknown level '" + cell(c_level) + "'");
        a.level = *level;
        a.area = cell(c_area);
        if (c_zone && !cell(*c_zone).empty()) a.zone = cell(*c_zone);
        const auto start = parse_iso_date(cell(c_start));
        if (!start)
            throw DataError("MalformedDate", "row " + std::to_string(row) + ", " + columns.start +
                                                 ": '" + cell(c_start) + "'");
        const auto finish = parse_iso_date(cell(c_finish));
        if (!finish)
            throw DataError("MalformedDate", "row " + std::to_string(row) + ", " + columns.finish +
                                                 ": '" + cell(c_finish) + "'");
        a.start = *start;
        a.finish = *finish;
        for (std::size_t c = 0; c < header.size(); ++c)
            if (!known.count(c)) a.extra_attributes[std::string(trim(header[c]))] = cell(c);

        for (const auto& e : parse_link_cell(rec[c_pred]))
            add_link(e.other_id, a.id, e.relation, e.lag_days, row);
        for (const auto& e : parse_link_cell(rec[c_succ]))
            add_link(a.id, e.other_id, e.relation, e.lag_days, row);

        schedule.activities.push_back(std::move(a));
    }

    for (const auto& key : link_order) {
        const auto& [pred, succ, rel] = key;
        schedule.links.push_back({pred, succ, rel, link_lags.at(key)});
    }

    const auto report = validate(schedule);
    if (!report.empty()) {
        const auto& v = report.front();
        throw DataError(v.code, "row " + std::to_string(v.row) + ", " + v.field + ": " + v.message);
    }
    return schedule;
}

ValidationReport validate(const Schedule& schedule) {
    ValidationReport report;
    std::unordered_map<std::string, std::size_t> first_row;
    for (std::size_t i = 0; i < schedule.activities.size(); ++i) {
        const auto& a = schedule.activities[i];
        const std::size_t row = i + 1;
        if (a.id.empty()) {
            report.push_back({row, std::string(column::kId), "EmptyId", "activity id is empty"});
        } else if (!first_row.emplace(a.id, row).second) {
            report.push_back({row, std::string(column::kId), "DuplicateId",
                              "duplicate activity id '" + a.id + "'"});
        }
        if (a.start > a.finish)
            report.push_back({row, std::string(column::kFinish), "MalformedDate",
                              "current start " + format_date(a.start) + " is after current finish " +
                                  format_date(a.finish)});
        if (a.wbs.empty() || std::any_of(a.wbs.begin(), a.wbs.end(), [](const auto& s) { return s.empty(); }))
            report.push_back({row, std::string(column::kWbs), "InvalidWbs", "WBS path has an empty segment"});
        const auto parts = split(a.discipline, '.');
        if (a.discipline.empty() ||
            std::any_of(parts.begin(), parts.end(), [](const auto& s) { return s.empty(); }))
            report.push_back({row, std::string(column::kDiscipline), "InvalidDiscipline",
                              "discipline '" + a.discipline + "' has an empty component"});
    }

    auto row_of = [&](const std::string& id) -> std::size_t {
        const auto it = first_row.find(id);
        return it == first_row.end() ? 0 : it->second;
    };

    std::set<LinkKey> seen;
    for (const auto& l : schedule.links) {
        const std::size_t succ_row = row_of(l.successor_id);
        const std::size_t row = succ_row ? succ_row : row_of(l.predecessor_id);
        const std::string desc = l.predecessor_id + "->" + l.successor_id;
        if (l.predecessor_id == l.successor_id)
            report.push_back({row, std::string(column::kPredecessors), "SelfLink", "self link " + desc});
        if (!row_of(l.predecessor_id))
            report.push_back({row, std::string(column::kPredecessors), "DanglingReference",
                              "unknown activity '" + l.predecessor_id + "' in link " + desc});
        if (!succ_row)
            report.push_back({row, std::string(column::kSuccessors), "DanglingReference",
                              "unknown activity '" + l.successor_id + "' in link " + desc});
        if (!seen.insert({l.predecessor_id, l.successor_id, l.relation}).second)
            report.push_back({row, std::string(column::kPredecessors), "DuplicateLink",
                              "duplicate link " + desc + " " + std::string(to_string(l.relation))});
    }

    std::stable_sort(report.begin(), report.end(), [](const Violation& a, const Violation& b) {
        return std::tie(a.row, a.field) < std::tie(b.row, b.field);
    });
    return report;
}

long duration_days(const Activity& activity) {
    return (activity.finish - activity.start).count();
}

std::vector<Row> to_rows(const Schedule& schedule) {
    std::set<std::string> extra_cols;
    for (const auto& a : schedule.activities)
        for (const auto& [k, v] : a.extra_attributes) extra_cols.insert(k);

    std::unordered_map<std::string, std::vector<LinkCellEntry>> preds, succs;
    for (const auto& l : schedule.links) {
        preds[l.successor_id].push_back({l.predecessor_id, l.relation, l.lag_days});
        succs[l.predecessor_id].push_back({l.successor_id, l.relation, l.lag_days});
    }
    auto cell = [](std::vector<LinkCellEntry> entries) {
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return std::tie(a.other_id, a.relation) < std::tie(b.other_id, b.relation);
        });
        std::vector<std::string> parts;
        for (const auto& e : entries) parts.push_back(format_link_entry(e));
        return join(parts, ";");
    };

    std::vector<Row> rows;
    rows.reserve(schedule.activities.size());
    for (const auto& a : schedule.activities) {
        Row row;
        row.emplace_back(column::kId, a.id);
        row.emplace_back(column::kName, a.name);
        row.emplace_back(column::kStatus, a.status);
        row.emplace_back(column::kWbs, join(a.wbs, "."));
        row.emplace_back(column::kDiscipline, a.discipline);
        row.emplace_back(column::kLevel, std::string(to_string(a.level)));
        row.emplace_back(column::kArea, a.area);
        row.emplace_back(column::kZone, a.zone.value_or(""));
        row.emplace_back(column::kStart, format_date(a.start));
        row.emplace_back(column::kFinish, format_date(a.finish));
        const auto p = preds.find(a.id);
        row.emplace_back(column::kPredecessors, p == preds.end() ? "" : cell(p->second));
        const auto s = succs.find(a.id);
        row.emplace_back(column::kSuccessors, s == succs.end() ? "" : cell(s->second));
        for (const auto& col : extra_cols) {
            const auto it = a.extra_attributes.find(col);
            row.emplace_back(col, it == a.extra_attributes.end() ? "" : it->second);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string serialize_schedule(const Schedule& schedule) {
    const auto rows = to_rows(schedule);
    std::vector<std::string> header = canonical_columns();
    if (!rows.empty())
        for (std::size_t i = header.size(); i < rows.front().size(); ++i) header.push_back(rows.front()[i].first);

    std::string out;
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out.push_back(',');
            out += quote_field(fields[i]);
        }
        out.push_back('\n');
    };
    emit(header);
    for (const auto& row : rows) {
        std::vector<std::string> fields;
        for (const auto& [k, v] : row) fields.push_back(v);
        emit(fields);
    }
    return out;
}

std::string export_activity_records(const Schedule& schedule) {
    std::string out;
    for (const auto& row : to_rows(schedule)) {
        nlohmann::ordered_json obj;
        for (const auto& [k, v] : row) obj[k] = v;
        out += obj.dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace constructa
