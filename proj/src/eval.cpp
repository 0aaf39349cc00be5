#include "constructa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <thread>

#include "constructa/util.hpp"
#include "json.hpp"

namespace constructa {

using nlohmann::ordered_json;

const std::vector<std::string>& default_maskable_columns() {
    static const std::vector<std::string> cols = [] {
        std::vector<std::string> out;
        for (const auto& c : canonical_columns())
            if (c != column::kId && c != column::kName) out.push_back(c);
        return out;
    }();
    return cols;
}

const std::vector<std::string>& relational_columns() {
    static const std::vector<std::string> cols{std::string(column::kStatus), std::string(column::kDiscipline),
                                               std::string(column::kLevel), std::string(column::kArea)};
    return cols;
}

const std::vector<std::string>& date_columns() {
    static const std::vector<std::string> cols{std::string(column::kStart), std::string(column::kFinish)};
    return cols;
}

namespace {

std::string cell_of(const Row& row, std::string_view column) {
    for (const auto& [c, v] : row)
        if (c == column) return v;
    throw UsageError("UnknownColumn", "column '" + std::string(column) + "' is not in the schedule");
}

// Row order first; columns absent from the row keep their given order at the end.
void order_by_row(std::vector<std::string>& cols, const Row& row) {
    auto pos = [&](const std::string& c) {
        for (std::size_t i = 0; i < row.size(); ++i)
            if (row[i].first == c) return i;
        return row.size();
    };
    std::stable_sort(cols.begin(), cols.end(), [&](const auto& a, const auto& b) { return pos(a) < pos(b); });
}

}  // namespace

std::vector<MaskSpec> make_mask_tasks(const Schedule& schedule, TaskKind kind, std::uint64_t seed,
                                      const std::vector<std::string>& maskable) {
    if (kind == TaskKind::Polish) throw UsageError("InvalidTaskKind", "polish is not a masked task");
    std::vector<std::string> pool;
    for (const auto& c : maskable)
        if (std::find(pool.begin(), pool.end(), c) == pool.end()) pool.push_back(c);
    if (kind == TaskKind::MVP && pool.size() < 3)
        throw UsageError("TooFewColumns", "MVP needs at least 3 maskable columns, got " + std::to_string(pool.size()));

    const auto rows = to_rows(schedule);
    std::vector<MaskSpec> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        MaskSpec spec;
        spec.row_id = schedule.activities[r].id;
        spec.task_kind = kind;
        if (kind == TaskKind::MVP) {
            auto rng = Rng::stream(seed, spec.row_id);
            std::vector<std::string> draw = pool;
            for (std::size_t i = 0; i < 3; ++i) {
                const auto j = i + static_cast<std::size_t>(rng.below(draw.size() - i));
                std::swap(draw[i], draw[j]);
            }
            spec.masked_columns.assign(draw.begin(), draw.begin() + 3);
        } else if (kind == TaskKind::DA) {
            spec.masked_columns = relational_columns();
        } else {
            spec.masked_columns = date_columns();
        }
        order_by_row(spec.masked_columns, rows[r]);
        for (const auto& c : spec.masked_columns) spec.ground_truth[c] = cell_of(rows[r], c);
        out.push_back(std::move(spec));
    }
    return out;
}

std::string render_masked_row(const Row& row, const std::vector<std::string>& masked_columns) {
    std::string out;
    for (const auto& [c, v] : row) {
        const bool masked = std::find(masked_columns.begin(), masked_columns.end(), c) != masked_columns.end();
        out += c + ": " + (masked ? std::string(kMaskedCell) : v) + "\n";
    }
    return out;
}

GroundTruthTable ground_truth_table(const Schedule& schedule) {
    GroundTruthTable table;
    const auto rows = to_rows(schedule);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (const auto& [c, v] : rows[r]) table[schedule.activities[r].id][c] = v;
    return table;
}

// ---- parsing and scoring -------------------------------------------------------

Completion parse_values(std::string_view raw_text, std::size_t expected_arity, std::size_t k) {
    static const std::regex item(R"(\[Value\]([\s\S]*?)\[/Value\])");
    Completion c;
    c.raw_text = std::string(raw_text);
    for (std::sregex_iterator it(c.raw_text.begin(), c.raw_text.end(), item), end; it != end; ++it) {
        std::vector<std::string> cands;
        for (const auto& part : split((*it)[1].str(), '|')) {
            if (cands.size() == k) break;
            cands.emplace_back(trim(part));
        }
        c.parsed_cells.push_back(std::move(cands));
    }
    c.parse_ok = expected_arity >= 1 && c.parsed_cells.size() == expected_arity;
    return c;
}

std::string render_value_list(const std::vector<std::string>& values) {
    std::vector<std::string> tagged;
    tagged.reserve(values.size());
    for (const auto& v : values) tagged.push_back("[Value]" + v + "[/Value]");
    return join(tagged, ", ");
}

ColumnKind column_kind(std::string_view column) {
    return column == column::kStart || column == column::kFinish ? ColumnKind::Date : ColumnKind::Text;
}

std::string canonical_cell(std::string_view value, ColumnKind kind) {
    auto text = normalize_whitespace(casefold(trim(value)));
    if (kind == ColumnKind::Date)
        if (const auto d = parse_loose_date(text)) return format_date(*d);
    return text;
}

bool score_cell(const std::vector<std::string>& candidates, std::string_view truth, ColumnKind kind,
                std::optional<int> date_tolerance_days) {
    const auto want = canonical_cell(truth, kind);
    const auto want_date = kind == ColumnKind::Date ? parse_iso_date(want) : std::nullopt;
    for (const auto& cand : candidates) {
        const auto got = canonical_cell(cand, kind);
        if (got == want) return true;
        if (date_tolerance_days && want_date)
            if (const auto d = parse_iso_date(got); d && std::abs((*d - *want_date).count()) <= *date_tolerance_days)
                return true;
    }
    return false;
}

// ---- reports --------------------------------------------------------------------

double Tally::cell_accuracy() const noexcept {
    return cells == 0 ? 0.0 : 100.0 * static_cast<double>(correct_cells) / static_cast<double>(cells);
}

double Tally::row_accuracy() const noexcept {
    return rows == 0 ? 0.0 : 100.0 * static_cast<double>(correct_rows) / static_cast<double>(rows);
}

void Tally::add(const Tally& o) noexcept {
    cells += o.cells;
    correct_cells += o.correct_cells;
    rows += o.rows;
    correct_rows += o.correct_rows;
    parse_failures += o.parse_failures;
}

double ScoreReport::accuracy(TaskKind kind) const {
    const auto it = per_task.find(kind);
    return it == per_task.end() ? 0.0 : it->second.cell_accuracy();
}

namespace {

constexpr TaskKind kScoredKinds[] = {TaskKind::MVP, TaskKind::DA, TaskKind::AP};

std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

ordered_json tally_json(const Tally& t) {
    return {{"cells", t.cells},
            {"correct_cells", t.correct_cells},
            {"cell_accuracy", t.cell_accuracy()},
            {"rows", t.rows},
            {"correct_rows", t.correct_rows},
            {"row_accuracy", t.row_accuracy()},
            {"parse_failures", t.parse_failures}};
}

}  // namespace

std::string ScoreReport::to_table() const {
    std::size_t width = 10;
    for (const auto& [dim, groups_of] : groups)
        for (const auto& [g, _] : groups_of) width = std::max(width, g.size());
    auto pad = [&](std::string s, std::size_t w) {
        s.resize(std::max(s.size(), w), ' ');
        return s;
    };
    auto line = [&](const std::string& label, const std::map<TaskKind, Tally>& by_task) {
        std::string out = pad(label, width + 2);
        for (const auto k : kScoredKinds) {
            const auto it = by_task.find(k);
            out += pad(it == by_task.end() ? "-" : fixed1(it->second.cell_accuracy()), 8);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + "\n";
    };

    std::string out = pad("Group", width + 2) + pad("MVP", 8) + pad("DA", 8) + "AP\n";
    for (const auto dim : {kByDiscipline, kByLevel, kByArea}) {
        const auto it = groups.find(std::string(dim));
        if (it == groups.end()) continue;
        out += "[" + std::string(dim) + "]\n";
        for (const auto& [g, by_task] : it->second) out += line(g, by_task);
    }
    out += line("Overall", per_task);
    if (!complete) out += "(incomplete run)\n";
    return out;
}

std::string ScoreReport::to_json() const {
    ordered_json j;
    j["k"] = k;
    j["date_tolerance_days"] = date_tolerance_days ? ordered_json(*date_tolerance_days) : ordered_json(nullptr);
    j["complete"] = complete;
    j["per_task"] = ordered_json::object();
    for (const auto& [kind, t] : per_task) j["per_task"][std::string(to_string(kind))] = tally_json(t);
    j["groups"] = ordered_json::object();
    for (const auto& [dim, groups_of] : groups) {
        auto& d = j["groups"][dim];
        d = ordered_json::object();
        for (const auto& [g, by_task] : groups_of) {
            auto& gj = d[g];
            gj = ordered_json::object();
            for (const auto& [kind, t] : by_task) gj[std::string(to_string(kind))] = tally_json(t);
        }
    }
    return j.dump(2) + "\n";
}

bool EvalInstance::all_correct() const {
    return completion.parse_ok && std::all_of(cell_correct.begin(), cell_correct.end(), [](bool b) { return b; });
}

namespace {

Tally tally_of(const EvalInstance& inst) {
    Tally t;
    t.rows = 1;
    t.cells = inst.spec.masked_columns.size();
    t.correct_cells = static_cast<std::size_t>(std::count(inst.cell_correct.begin(), inst.cell_correct.end(), true));
    t.correct_rows = inst.all_correct() ? 1 : 0;
    t.parse_failures = inst.completion.parse_ok ? 0 : 1;
    return t;
}

// Unparseable answers still get per-cell credit where cells line up.
std::vector<bool> score_instance(const MaskSpec& spec, const Completion& completion, const EvalOptions& opt) {
    std::vector<bool> out;
    for (std::size_t i = 0; i < spec.masked_columns.size(); ++i) {
        const auto& col = spec.masked_columns[i];
        out.push_back(i < completion.parsed_cells.size() &&
                      score_cell(completion.parsed_cells[i], spec.ground_truth.at(col), column_kind(col),
                                 opt.date_tolerance_days));
    }
    return out;
}

}  // namespace

ScoreReport build_report(const std::vector<EvalInstance>& instances, const EvalOptions& options) {
    ScoreReport r;
    r.k = options.k;
    r.date_tolerance_days = options.date_tolerance_days;
    for (const auto& inst : instances) {
        const auto t = tally_of(inst);
        r.per_task[inst.spec.task_kind].add(t);
        for (const auto& [dim, g] : inst.groups) r.groups[dim][g][inst.spec.task_kind].add(t);
    }
    return r;
}

std::string eval_instances_to_records(const std::vector<EvalInstance>& instances) {
    std::string out;
    for (const auto& inst : instances) {
        ordered_json j;
        j["kind"] = to_string(inst.spec.task_kind);
        j["row_id"] = inst.spec.row_id;
        j["masked_columns"] = inst.spec.masked_columns;
        j["ground_truth"] = inst.spec.ground_truth;
        j["groups"] = inst.groups;
        j["transcript_id"] = inst.transcript_id;
        j["system"] = inst.system_text;
        j["user"] = inst.user_text;
        j["response"] = inst.completion.raw_text;
        j["cells"] = inst.completion.parsed_cells;
        j["parse_ok"] = inst.completion.parse_ok;
        j["correct"] = inst.cell_correct;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<EvalInstance> eval_instances_from_records(std::string_view text) {
    std::vector<EvalInstance> out;
    std::size_t n = 0;
    for (const auto& line : split(text, '\n')) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            EvalInstance inst;
            const auto kind = parse_task_kind(j.at("kind").get<std::string>());
            if (!kind) throw DataError("CorruptRecord", "unknown task kind");
            inst.spec.task_kind = *kind;
            inst.spec.row_id = j.at("row_id").get<std::string>();
            inst.spec.masked_columns = j.at("masked_columns").get<std::vector<std::string>>();
            inst.spec.ground_truth = j.at("ground_truth").get<std::map<std::string, std::string>>();
            inst.groups = j.at("groups").get<std::map<std::string, std::string>>();
            inst.transcript_id = j.at("transcript_id").get<std::string>();
            inst.system_text = j.at("system").get<std::string>();
            inst.user_text = j.at("user").get<std::string>();
            inst.completion.raw_text = j.at("response").get<std::string>();
            inst.completion.parsed_cells = j.at("cells").get<std::vector<std::vector<std::string>>>();
            inst.completion.parse_ok = j.at("parse_ok").get<bool>();
            inst.cell_correct = j.at("correct").get<std::vector<bool>>();
            if (inst.cell_correct.size() != inst.spec.masked_columns.size())
                throw DataError("CorruptRecord", "correct flags do not match masked columns");
            out.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("CorruptRecord", "line " + std::to_string(n) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("CorruptRecord", "line " + std::to_string(n) + ": " + e.message());
        }
    }
    return out;
}

// ---- running ----------------------------------------------------------------------

EvalRun run_eval(const Schedule& schedule, const std::vector<MaskSpec>& tasks, Gateway& gateway,
                 const PromptInputs& inputs, const EvalOptions& options) {
    const auto rows = to_rows(schedule);

    // Prompts are built up front so that a bad task fails before any call.
    struct Prepared {
        const Activity* activity;
        TaskPrompt prompt;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(tasks.size());
    for (const auto& spec : tasks) {
        const auto idx = schedule.index_of(spec.row_id);
        if (!idx) throw DataError("UnknownActivity", "no activity '" + spec.row_id + "' in the schedule");
        const auto& act = schedule.activities[*idx];
        PromptSections s;
        s.row = render_masked_row(rows[*idx], spec.masked_columns);
        if (inputs.static_knowledge) s.static_knowledge = inputs.static_knowledge(act);
        if (inputs.context) s.context = inputs.context(act);
        s.rules = inputs.rules;
        prepared.push_back({&act, build_task_prompt(spec.task_kind, s, spec.masked_columns, options.k)});
    }

    std::vector<std::optional<EvalInstance>> results(tasks.size());
    std::vector<char> started(tasks.size(), 0);
    const auto base = gateway.transcript().reserve(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex err_mu;
    std::optional<GatewayError> first_error;

    auto worker = [&] {
        for (;;) {
            if (abort.load()) return;
            const auto i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            started[i] = 1;
            const auto& spec = tasks[i];
            const auto& p = prepared[i];
            EvalInstance inst;
            inst.spec = spec;
            inst.transcript_id = std::string(to_string(spec.task_kind)) + ":" + spec.row_id;
            inst.groups = {{std::string(kByDiscipline), p.activity->discipline},
                           {std::string(kByLevel), std::string(to_string(p.activity->level))},
                           {std::string(kByArea), p.activity->area}};
            inst.system_text = p.prompt.system_text;
            inst.user_text = p.prompt.user_text;
            try {
                const auto ex = gateway.complete(p.prompt.system_text, p.prompt.user_text,
                                                 CallTag{inst.transcript_id, base + i});
                inst.completion = parse_values(*ex.response_text, spec.masked_columns.size(), options.k);
                inst.cell_correct = score_instance(spec, inst.completion, options);
                results[i] = std::move(inst);
            } catch (const GatewayError& e) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = e;
                abort = true;
                return;
            }
        }
    };

    const auto n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(gateway.config().max_parallel), std::max<std::size_t>(1, tasks.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    EvalRun run;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!started[i]) gateway.transcript().skip(base + i);
        if (results[i]) run.instances.push_back(std::move(*results[i]));
    }
    run.report = build_report(run.instances, options);
    if (first_error) {
        run.report.complete = false;
        throw EvalIncomplete(*first_error, std::move(run));
    }
    return run;
}

PromptInputs krag_inputs(const ScheduleGraph& graph, const Schedule& schedule, const SamplerConfig& sampler,
                         const TermStore* terms, const ChunkStore* chunks, const Embedder* embedder,
                         std::string rules) {
    PromptInputs in;
    in.rules = std::move(rules);
    in.context = [&graph, &schedule, sampler](const Activity& a) {
        return render_context(combined_context(graph, schedule, a.id, sampler), schedule);
    };
    if (embedder && ((terms && !terms->empty()) || (chunks && !chunks->empty()))) {
        in.static_knowledge = [&graph, &schedule, sampler, terms, chunks, embedder](const Activity& a) {
            const auto query = render_context(combined_context(graph, schedule, a.id, sampler), schedule);
            const auto q = embedder->embed(query);
            std::string out;
            if (terms && !terms->empty()) {
                const auto& best = retrieve_local(*terms, *embedder, query);
                out += "TERM " + best.term + ": " + best.definition + "\n";
            }
            if (chunks && !chunks->empty())
                for (const auto& hit : retrieve_global(*chunks, q, 3))
                    out += "[" + hit.chunk->doc_id + "#" + std::to_string(hit.chunk->chunk_index) + "] " +
                           hit.chunk->text + "\n";
            return out;
        };
    }
    return in;
}

// ---- preferences -------------------------------------------------------------------

namespace {

std::string truth_completion(const MaskSpec& spec) {
    std::vector<std::string> values;
    for (const auto& c : spec.masked_columns) values.push_back(spec.ground_truth.at(c));
    return render_value_list(values);
}

PreferenceRecord base_record(const EvalInstance& inst) {
    PreferenceRecord r;
    r.prompt_text = inst.system_text + "\n\n" + inst.user_text;
    r.task_kind = inst.spec.task_kind;
    r.row_id = inst.spec.row_id;
    r.context_length_tokens = token_count(r.prompt_text);
    return r;
}

}  // namespace

std::vector<PreferenceRecord> collect_preferences(std::span<const EvalRun> runs, const PreferenceOptions& options) {
    // Instances grouped by (task, row), first appearance order.
    std::vector<std::pair<TaskKind, std::string>> order;
    std::map<std::pair<TaskKind, std::string>, std::vector<const EvalInstance*>> by_key;
    // column -> distinct truth values (for synthesized corruptions)
    std::map<std::string, std::set<std::string>> column_values;
    for (const auto& run : runs)
        for (const auto& inst : run.instances) {
            const std::pair key{inst.spec.task_kind, inst.spec.row_id};
            auto& v = by_key[key];
            if (v.empty()) order.push_back(key);
            v.push_back(&inst);
            for (const auto& [c, val] : inst.spec.ground_truth) column_values[c].insert(val);
        }

    std::vector<PreferenceRecord> out;
    for (const auto& key : order) {
        const auto& insts = by_key[key];
        std::vector<const EvalInstance*> wrong;
        for (const auto* i : insts)
            if (!i->all_correct()) wrong.push_back(i);

        if (!wrong.empty()) {
            auto r = base_record(*wrong.front());
            r.chosen_text = truth_completion(wrong.front()->spec);
            r.rejected_text = wrong.front()->completion.raw_text;
            r.meta["source"] = "evaluated";
            r.meta["negatives"] = std::to_string(wrong.size());
            for (std::size_t j = 1; j < wrong.size(); ++j)
                r.meta["negative_" + std::to_string(j)] = wrong[j]->completion.raw_text;
            if (r.chosen_text != r.rejected_text) out.push_back(std::move(r));
            continue;
        }
        if (!options.synthesize_negatives) continue;

        // Swap one cell for another row's value in the same column.
        const auto& inst = *insts.front();
        auto rng = Rng::stream(options.seed, std::string(to_string(key.first)) + ":" + key.second);
        std::vector<std::string> cols = inst.spec.masked_columns;
        rng.shuffle(cols);
        for (const auto& col : cols) {
            const auto kind = column_kind(col);
            const auto truth = canonical_cell(inst.spec.ground_truth.at(col), kind);
            std::vector<std::string> alts;
            for (const auto& v : column_values[col])
                if (canonical_cell(v, kind) != truth) alts.push_back(v);
            if (alts.empty()) continue;
            std::vector<std::string> values;
            for (const auto& c : inst.spec.masked_columns)
                values.push_back(c == col ? alts[rng.below(alts.size())] : inst.spec.ground_truth.at(c));
            auto r = base_record(inst);
            r.chosen_text = inst.completion.raw_text;
            r.rejected_text = render_value_list(values);
            r.meta["source"] = "synthesized";
            r.meta["corrupted_column"] = col;
            if (r.chosen_text != r.rejected_text) out.push_back(std::move(r));
            break;
        }
    }
    return out;
}

std::string preference_to_record(const PreferenceRecord& r) {
    ordered_json j;
    j["prompt"] = r.prompt_text;
    j["chosen"] = r.chosen_text;
    j["rejected"] = r.rejected_text;
    j["task_kind"] = to_string(r.task_kind);
    j["row_id"] = r.row_id;
    j["context_length_tokens"] = r.context_length_tokens;
    j["meta"] = r.meta;
    return j.dump();
}

PreferenceRecord preference_from_record(std::string_view line) {
    PreferenceRecord r;
    try {
        const auto j = nlohmann::json::parse(line);
        r.prompt_text = j.at("prompt").get<std::string>();
        r.chosen_text = j.at("chosen").get<std::string>();
        r.rejected_text = j.at("rejected").get<std::string>();
        const auto kind = parse_task_kind(j.at("task_kind").get<std::string>());
        if (!kind) throw DataError("CorruptRecord", "unknown task kind");
        r.task_kind = *kind;
        r.row_id = j.at("row_id").get<std::string>();
        r.context_length_tokens = j.at("context_length_tokens").get<std::size_t>();
        r.meta = j.at("meta").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("CorruptRecord", e.what());
    }
    return r;
}

void PreferenceStore::append(const PreferenceRecord& record) const {
    append(std::vector<PreferenceRecord>{record});
}

void PreferenceStore::append(const std::vector<PreferenceRecord>& records) const {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw DataError("MissingFile", "cannot open preference store " + path_.string());
    for (const auto& r : records) out << preference_to_record(r) << '\n' << std::flush;
}

std::vector<PreferenceRecord> PreferenceStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot read preference store " + path.string());
    std::vector<PreferenceRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(preference_from_record(line));
        } catch (const DataError& e) {
            throw DataError("CorruptRecord", path.string() + ":" + std::to_string(n) + ": " + e.message());
        }
    }
    return out;
}

}  // namespace constructa
