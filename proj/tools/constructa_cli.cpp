#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "constructa/alignment.hpp"
#include "constructa/config.hpp"
#include "constructa/eval.hpp"
#include "constructa/gateway.hpp"
#include "constructa/graph.hpp"
#include "constructa/knowledge.hpp"
#include "constructa/prompts.hpp"
#include "constructa/sampler.hpp"
#include "constructa/schedule.hpp"
#include "constructa/synthetic.hpp"
#include "constructa/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace constructa;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "constructa 0.1.0";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require_exists(const std::string& path, const char* what) {
    if (path.empty()) throw UsageError("MissingInput", std::string(what) + " is not set");
    if (!fs::exists(path)) throw DataError("MissingFile", std::string(what) + " '" + path + "' does not exist");
}

std::string input_hash(const fs::path& path) {
    if (!fs::is_directory(path)) return sha256_hex(read_file(path));
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += f.filename().string() + " " + sha256_hex(read_file(f)) + "\n";
    return sha256_hex(acc);
}

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// One subcommand's output directory plus its manifest bookkeeping.
class RunOutput {
public:
    RunOutput(const RunConfig& cfg, std::string subcommand)
        : cfg_(cfg), sub_(std::move(subcommand)), dir_(fs::path(cfg.paths.output_dir) / sub_) {
        fs::create_directories(dir_);
    }

    const fs::path& dir() const { return dir_; }
    fs::path file(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("WriteFailed", "cannot write " + (dir_ / name).string());
        out << content;
        out.close();
        note_output(name);
    }
    /// Registers a file some module wrote itself.
    void note_output(const std::string& name) {
        if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
    }
    void add_input(const std::string& role, const fs::path& path) { inputs_.emplace_back(role, path); }

    /// result.json, then manifest.json listing every input and output.
    void finish(const ordered_json& result) {
        write("result.json", result.dump(2) + "\n");
        ordered_json m;
        m["subcommand"] = sub_;
        m["version"] = kVersion;
        m["config_hash"] = cfg_.hash();
        m["config"] = cfg_.to_ini();
        m["seeds"] = {{"collection", cfg_.eval.seed},
                      {"sampler", cfg_.sampler.rng_seed},
                      {"training", cfg_.loss.seed},
                      {"inference", cfg_.gateway.request_seed}};
        m["inputs"] = ordered_json::array();
        for (const auto& [role, p] : inputs_)
            m["inputs"].push_back({{"role", role}, {"name", p.filename().string()}, {"sha256", input_hash(p)}});
        m["outputs"] = ordered_json::array();
        auto names = outputs_;
        std::sort(names.begin(), names.end());
        for (const auto& n : names)
            m["outputs"].push_back({{"name", n}, {"sha256", sha256_hex(read_file(dir_ / n))}});
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        out << m.dump(2) << "\n";
    }

private:
    const RunConfig& cfg_;
    std::string sub_;
    fs::path dir_;
    std::vector<std::string> outputs_;
    std::vector<std::pair<std::string, fs::path>> inputs_;
};

Schedule load_schedule(const std::string& path, RunOutput& out) {
    require_exists(path, "schedule");
    out.add_input("schedule", path);
    return parse_schedule(read_file(path), {}, fs::path(path).filename().string());
}

std::vector<TaskKind> evaluation_tasks(const RunConfig& cfg) { return cfg.eval.tasks; }

std::shared_ptr<TranscriptLog> open_transcript(const RunConfig& cfg, RunOutput& out, const std::string& sub) {
    if (!cfg.paths.transcript_dir.empty())
        return std::make_shared<TranscriptLog>(fs::path(cfg.paths.transcript_dir) / (sub + ".transcript.jsonl"));
    out.note_output("transcript.jsonl");
    return std::make_shared<TranscriptLog>(out.file("transcript.jsonl"));
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& cfg, const Schedule* schedule,
                                      std::shared_ptr<TranscriptLog> log, RunOutput& out) {
    const auto& sel = cfg.gateway_selector;
    MockData data;
    if (sel == "http") return std::make_unique<Gateway>(cfg.gateway, std::make_unique<HttpChatBackend>(), log);
    if (sel == "mock:echo") {
        if (!schedule) throw UsageError("InvalidGateway", "mock:echo needs a schedule");
        data.ground_truth = ground_truth_table(*schedule);
        return register_mock(MockKind::EchoOracle, data, cfg.gateway, log);
    }
    if (sel == "mock:wrong") return register_mock(MockKind::ConstantWrong, data, cfg.gateway, log);
    if (sel == "mock:stopword") return register_mock(MockKind::StopwordStripper, data, cfg.gateway, log);
    if (sel == "mock:identity") return register_mock(MockKind::Identity, data, cfg.gateway, log);
    if (sel.rfind("mock:replay:", 0) == 0) {
        const auto file = sel.substr(std::string("mock:replay:").size());
        require_exists(file, "replay transcript");
        out.add_input("replay", file);
        data.transcript = file;
        return register_mock(MockKind::ScriptedTranscript, data, cfg.gateway, log);
    }
    throw UsageError("InvalidGateway", "unknown gateway selector '" + sel + "'");
}

struct KnowledgeBase {
    std::optional<TermStore> terms;
    std::optional<ChunkStore> chunks;
};

KnowledgeBase load_kb(const std::string& dir, std::size_t dim, RunOutput& out) {
    KnowledgeBase kb;
    if (dir.empty()) return kb;
    require_exists(dir, "knowledge base directory");
    out.add_input("knowledge_base", dir);
    kb.terms = TermStore::load(fs::path(dir) / "terms");
    kb.chunks = ChunkStore::load(fs::path(dir) / "chunks");
    if (kb.terms->dimension() != dim || kb.chunks->dimension() != dim)
        throw DataError("DimensionMismatch", "knowledge base dimension differs from embed.dimension " + std::to_string(dim));
    return kb;
}

// ---- subcommands ---------------------------------------------------------------------

struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> output_dir;
    std::optional<std::string> schedule;
    std::optional<std::string> gateway;
    std::optional<std::string> tasks;
    std::optional<std::size_t> k;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> inference_seed;
    std::optional<int> max_parallel;
    std::optional<int> hops, levels, paths;
    std::optional<std::string> corpus_dir, term_file, preference_db, transcript_dir;
    std::optional<std::size_t> dim;
    std::optional<int> tolerance;
    std::optional<double> alpha, beta, learning_rate;
    std::optional<std::size_t> epochs_sft, epochs;
    std::optional<std::string> rule_loss;
    bool synthesize = false;
};

RunConfig resolve(const Overrides& o) {
    RunConfig c = o.config ? RunConfig::from_file(*o.config) : RunConfig{};
    if (o.output_dir) c.paths.output_dir = *o.output_dir;
    if (o.schedule) c.paths.schedule = *o.schedule;
    if (o.corpus_dir) c.paths.corpus_dir = *o.corpus_dir;
    if (o.term_file) c.paths.term_file = *o.term_file;
    if (o.preference_db) c.paths.preference_db = *o.preference_db;
    if (o.transcript_dir) c.paths.transcript_dir = *o.transcript_dir;
    if (o.gateway) c.gateway_selector = *o.gateway;
    if (o.tasks) c.eval.tasks = parse_task_list(*o.tasks);
    if (o.k) c.eval.k = *o.k;
    if (o.seed) c.eval.seed = c.sampler.rng_seed = c.loss.seed = *o.seed;
    if (o.inference_seed) c.gateway.request_seed = *o.inference_seed;
    if (o.max_parallel) c.gateway.max_parallel = *o.max_parallel;
    if (o.hops) c.sampler.max_sequential_hops = *o.hops;
    if (o.levels) c.sampler.max_wbs_levels = *o.levels;
    if (o.paths) c.sampler.paths_per_direction = *o.paths;
    if (o.dim) c.embed_dimension = *o.dim;
    if (o.tolerance) c.eval.date_tolerance_days = *o.tolerance;
    if (o.alpha) c.loss.weights.alpha = *o.alpha;
    if (o.beta) c.loss.weights.beta = *o.beta;
    if (o.learning_rate) c.loss.learning_rate = *o.learning_rate;
    if (o.epochs_sft) c.loss.epochs_sft = *o.epochs_sft;
    if (o.epochs) c.loss.epochs = *o.epochs;
    if (o.rule_loss) c.loss.rule_loss = *o.rule_loss;
    if (o.synthesize) c.eval.synthesize_negatives = true;
    c.check();
    return c;
}

struct GenerateArgs {
    std::size_t n = 100;
    std::optional<double> target_degree;
    std::optional<std::size_t> window;
};

int cmd_generate(const RunConfig& cfg, const GenerateArgs& a) {
    RunOutput out(cfg, "generate");
    GeneratorParams p;
    p.n_activities = a.n;
    p.seed = cfg.eval.seed;
    if (a.target_degree) p.target_mean_degree = *a.target_degree;
    if (a.window) p.window = *a.window;
    const auto s = generate_schedule(p);
    out.write("schedule.csv", serialize_schedule(s));
    const auto g = build_graph(s);
    const auto stats = degree_distribution(g);
    ordered_json r{{"activities", s.activities.size()},
                   {"links", s.links.size()},
                   {"degree_mean", stats.degree_mean},
                   {"target_mean_degree", p.target_mean_degree},
                   {"window", p.window},
                   {"seed", p.seed},
                   {"violations", validate(s).size()},
                   {"cycles", detect_cycles(g).size()}};
    out.finish(r);
    std::cout << "generated " << s.activities.size() << " activities, " << s.links.size()
              << " links, mean degree " << fmt(stats.degree_mean) << " -> " << out.file("schedule.csv").string() << "\n";
    return 0;
}

int cmd_ingest(const RunConfig& cfg) {
    RunOutput out(cfg, "ingest");
    const auto s = load_schedule(cfg.paths.schedule, out);
    out.write("schedule.csv", serialize_schedule(s));
    out.write("activities.jsonl", export_activity_records(s));
    out.finish({{"activities", s.activities.size()}, {"links", s.links.size()}, {"violations", 0}});
    std::cout << "ingested " << s.activities.size() << " activities and " << s.links.size() << " links\n";
    return 0;
}

int cmd_analyze(const RunConfig& cfg, const std::string& direction) {
    RunOutput out(cfg, "analyze-graph");
    const auto s = load_schedule(cfg.paths.schedule, out);
    const auto g = build_graph(s);
    const auto cycles = detect_cycles(g);
    if (!cycles.empty()) {
        ordered_json r{{"nodes", g.node_count()}, {"edges", g.edge_count()}, {"cycles", cycles}};
        out.finish(r);
        throw DataError("CyclicGraph", std::to_string(cycles.size()) + " cycle(s), first through " + cycles[0][0]);
    }
    HopDirection dir;
    if (direction == "downstream") dir = HopDirection::Downstream;
    else if (direction == "both") dir = HopDirection::Both;
    else throw UsageError("InvalidDirection", "direction must be downstream or both");
    const auto stats = graph_stats(g, dir);
    out.write("stats.jsonl", export_stats_records(stats));
    out.write("degree_histogram.txt", histogram_text(stats.degree_histogram));
    out.write("maxhop_histogram.txt", histogram_text(stats.maxhop_histogram));
    ordered_json r{{"nodes", g.node_count()},
                   {"edges", g.edge_count()},
                   {"degree_mean", stats.degree_mean},
                   {"degree_max", stats.degree_max},
                   {"maxhop_mean", stats.maxhop_mean},
                   {"maxhop_max", stats.maxhop_max},
                   {"direction", direction},
                   {"cycles", ordered_json::array()}};
    out.finish(r);
    std::cout << "nodes " << g.node_count() << ", edges " << g.edge_count() << ", degree mean " << fmt(stats.degree_mean)
              << ", maxhop mean " << fmt(stats.maxhop_mean) << "\n";
    return 0;
}

int cmd_build_kb(const RunConfig& cfg, std::size_t chunk_tokens) {
    RunOutput out(cfg, "build-kb");
    require_exists(cfg.paths.corpus_dir, "corpus directory");
    require_exists(cfg.paths.term_file, "term file");
    out.add_input("corpus", cfg.paths.corpus_dir);
    out.add_input("terms", cfg.paths.term_file);
    HashedNgramEmbedder embedder(cfg.embed_dimension);
    TermStore terms(cfg.embed_dimension);
    for (auto& [t, d] : load_term_file(cfg.paths.term_file)) terms.add(t, d, embedder);
    ChunkStore chunks(cfg.embed_dimension);
    const auto docs = load_corpus_dir(cfg.paths.corpus_dir);
    for (const auto& [id, text] : docs) chunks.add_document(id, text, embedder, chunk_tokens);
    terms.save(out.file("terms"));
    chunks.save(out.file("chunks"));
    for (const auto* n : {"terms.manifest.jsonl", "terms.emb", "chunks.manifest.jsonl", "chunks.emb"})
        out.note_output(n);
    out.finish({{"terms", terms.entries().size()},
                {"documents", docs.size()},
                {"chunks", chunks.chunks().size()},
                {"dimension", cfg.embed_dimension},
                {"chunk_tokens", chunk_tokens}});
    std::cout << "knowledge base: " << terms.entries().size() << " terms, " << chunks.chunks().size()
              << " chunks from " << docs.size() << " documents\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::vector<std::string>& targets) {
    RunOutput out(cfg, "sample-context");
    const auto s = load_schedule(cfg.paths.schedule, out);
    const auto g = build_graph(s);
    std::vector<std::string> ids = targets;
    if (ids.empty())
        for (const auto& a : s.activities) ids.push_back(a.id);
    std::string records, text;
    double fo = 0, hier = 0, seq = 0;
    for (const auto& id : ids) {
        if (!s.find(id)) throw DataError("UnknownActivity", "no activity '" + id + "'");
        const auto b = combined_context(g, s, id, cfg.sampler);
        records += bundle_to_record(b) + "\n";
        text += render_context(b, s) + "\n";
        fo += static_cast<double>(b.first_order.size());
        hier += static_cast<double>(b.hierarchical.size());
        seq += static_cast<double>(b.sequential.size());
    }
    out.write("contexts.jsonl", records);
    out.write("contexts.txt", text);
    const double n = std::max<double>(1, static_cast<double>(ids.size()));
    out.finish({{"targets", ids.size()},
                {"mean_first_order", fo / n},
                {"mean_hierarchical", hier / n},
                {"mean_sequential_paths", seq / n}});
    std::cout << "sampled " << ids.size() << " context bundle(s)\n";
    return 0;
}

std::string optional_text(const std::string& path, RunOutput& out, const char* role) {
    if (path.empty()) return {};
    require_exists(path, role);
    out.add_input(role, path);
    return read_file(path);
}

int cmd_run_eval(const RunConfig& cfg, const std::string& kb_dir, const std::string& rules_file, std::size_t limit) {
    RunOutput out(cfg, "run-eval");
    const auto s = load_schedule(cfg.paths.schedule, out);
    const auto g = build_graph(s);
    const auto kb = load_kb(kb_dir, cfg.embed_dimension, out);
    HashedNgramEmbedder embedder(cfg.embed_dimension);
    const auto inputs = krag_inputs(g, s, cfg.sampler, kb.terms ? &*kb.terms : nullptr,
                                    kb.chunks ? &*kb.chunks : nullptr, &embedder,
                                    optional_text(rules_file, out, "rules"));
    std::vector<MaskSpec> tasks;
    for (const auto kind : evaluation_tasks(cfg)) {
        auto t = make_mask_tasks(s, kind, cfg.eval.seed);
        if (limit > 0 && t.size() > limit) t.resize(limit);
        tasks.insert(tasks.end(), t.begin(), t.end());
    }
    auto log = open_transcript(cfg, out, "run-eval");
    auto gw = make_gateway(cfg, &s, log, out);
    EvalOptions opt{cfg.eval.k, cfg.eval.date_tolerance_days};

    auto write_run = [&](const EvalRun& run) {
        out.write("eval_instances.jsonl", eval_instances_to_records(run.instances));
        out.write("score_report.json", run.report.to_json());
        out.write("score_table.txt", run.report.to_table());
    };
    try {
        const auto run = run_eval(s, tasks, *gw, inputs, opt);
        write_run(run);
        ordered_json r{{"instances", run.instances.size()}, {"complete", true}};
        for (const auto& [kind, t] : run.report.per_task) {
            r["accuracy"][std::string(to_string(kind))] = t.cell_accuracy();
            r["row_accuracy"][std::string(to_string(kind))] = t.row_accuracy();
        }
        out.finish(r);
        std::cout << run.report.to_table();
    } catch (const EvalIncomplete& e) {
        write_run(e.partial());
        out.finish({{"instances", e.partial().instances.size()}, {"complete", false}, {"error", e.what()}});
        throw;
    }
    return 0;
}

int cmd_collect(const RunConfig& cfg, const std::vector<std::string>& eval_files) {
    RunOutput out(cfg, "collect-prefs");
    if (eval_files.empty()) throw UsageError("MissingInput", "give at least one --eval file");
    std::vector<EvalRun> runs;
    std::size_t instances = 0, wrong = 0;
    for (const auto& f : eval_files) {
        require_exists(f, "eval instances");
        out.add_input("eval", f);
        EvalRun run;
        run.instances = eval_instances_from_records(read_file(f));
        for (const auto& i : run.instances) wrong += i.all_correct() ? 0 : 1;
        instances += run.instances.size();
        runs.push_back(std::move(run));
    }
    PreferenceOptions opt{cfg.eval.synthesize_negatives, cfg.eval.seed};
    const auto records = collect_preferences(runs, opt);
    fs::path db = cfg.paths.preference_db.empty() ? out.file("preferences.jsonl") : fs::path(cfg.paths.preference_db);
    PreferenceStore(db).append(records);
    if (cfg.paths.preference_db.empty()) out.note_output("preferences.jsonl");
    out.finish({{"instances", instances},
                {"wrong_instances", wrong},
                {"records", records.size()},
                {"synthesized", cfg.eval.synthesize_negatives},
                {"database", db.filename().string()}});
    std::cout << "collected " << records.size() << " preference record(s) from " << instances << " instance(s)\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& prefs) {
    RunOutput out(cfg, "train-scorer");
    const auto path = prefs.empty() ? cfg.paths.preference_db : prefs;
    require_exists(path, "preference database");
    out.add_input("preferences", path);
    const auto records = PreferenceStore::load(path);
    HashedNgramEmbedder embedder(cfg.embed_dimension);
    TrainConfig tc;
    tc.weights = cfg.loss.weights;
    tc.epochs_sft = cfg.loss.epochs_sft;
    tc.epochs = cfg.loss.epochs;
    tc.learning_rate = cfg.loss.learning_rate;
    tc.seed = cfg.loss.seed;
    const auto rule = make_rule_loss(cfg.loss.rule_loss);
    const auto examples = make_training_set(records, embedder);
    const auto scorer = train_scorer(examples, tc, *rule);
    scorer.save(out.file("scorer.bin"));
    out.note_output("scorer.bin");
    out.write("training_log.jsonl", training_log_to_records(scorer.training_log()));
    const double acc = pairwise_accuracy(scorer, examples);
    const auto& last = scorer.training_log().empty() ? EpochLog{} : scorer.training_log().back();
    out.finish({{"records", records.size()},
                {"epochs_sft", tc.epochs_sft},
                {"epochs", tc.epochs},
                {"learning_rate", tc.learning_rate},
                {"alpha", tc.weights.alpha},
                {"beta", tc.weights.beta},
                {"rule_loss", rule->name()},
                {"last_epoch_l_total", last.loss.l_total},
                {"pairwise_accuracy", acc}});
    std::cout << "trained scorer on " << records.size() << " pair(s), pairwise accuracy " << fmt(100 * acc, 1)
              << "%\n";
    return 0;
}

int cmd_polish(const RunConfig& cfg, const std::string& kb_dir, std::size_t limit, std::size_t bin_width) {
    RunOutput out(cfg, "polish");
    const auto s = load_schedule(cfg.paths.schedule, out);
    const auto g = build_graph(s);
    const auto kb = load_kb(kb_dir, cfg.embed_dimension, out);
    HashedNgramEmbedder embedder(cfg.embed_dimension);
    const auto inputs = krag_inputs(g, s, cfg.sampler, kb.terms ? &*kb.terms : nullptr,
                                    kb.chunks ? &*kb.chunks : nullptr, &embedder);
    const auto rows = to_rows(s);
    std::vector<PolishItem> items;
    for (const auto kind : evaluation_tasks(cfg)) {
        auto tasks = make_mask_tasks(s, kind, cfg.eval.seed);
        if (limit > 0 && tasks.size() > limit) tasks.resize(limit);
        for (const auto& t : tasks) {
            const auto idx = *s.index_of(t.row_id);
            PolishItem item;
            item.source = kind;
            item.transcript_id = "polish:" + std::string(to_string(kind)) + ":" + t.row_id;
            item.sections.row = render_masked_row(rows[idx], t.masked_columns);
            if (inputs.static_knowledge) item.sections.static_knowledge = inputs.static_knowledge(s.activities[idx]);
            item.sections.context = inputs.context(s.activities[idx]);
            items.push_back(std::move(item));
        }
    }
    auto log = open_transcript(cfg, out, "polish");
    auto gw = make_gateway(cfg, &s, log, out);
    ContextLengthStats stats;
    const auto results = polish_batch(*gw, items, stats);
    std::string polished;
    for (std::size_t i = 0; i < results.size(); ++i)
        polished += ordered_json{{"source", to_string(items[i].source)},
                                 {"id", items[i].transcript_id},
                                 {"raw_tokens", results[i].raw_tokens},
                                 {"polished_tokens", results[i].polished_tokens},
                                 {"polished", results[i].polished_text}}
                        .dump() +
                    "\n";
    out.write("polished.jsonl", polished);
    out.write("context_lengths.json", stats.to_json());
    ordered_json r{{"instances", results.size()}, {"bin_width", bin_width}};
    for (const auto& [kind, _] : stats.raw) {
        const std::string k(to_string(kind));
        out.write("hist_" + k + "_raw.txt", stats.histogram_text(kind, false, bin_width));
        out.write("hist_" + k + "_polished.txt", stats.histogram_text(kind, true, bin_width));
        r["mean_raw"][k] = stats.mean(kind, false);
        r["mean_polished"][k] = stats.mean(kind, true);
        std::cout << k << ": " << stats.count(kind) << " instance(s), mean tokens " << fmt(stats.mean(kind, false), 1)
                  << " -> " << fmt(stats.mean(kind, true), 1) << "\n";
    }
    out.finish(r);
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::string& eval_file, bool matrices) {
    RunOutput out(cfg, "report");
    ordered_json r;
    if (!eval_file.empty()) {
        require_exists(eval_file, "eval instances");
        out.add_input("eval", eval_file);
        const auto instances = eval_instances_from_records(read_file(eval_file));
        EvalOptions opt{cfg.eval.k, cfg.eval.date_tolerance_days};
        const auto report = build_report(instances, opt);
        out.write("score_table.txt", report.to_table());
        out.write("score_report.json", report.to_json());
        for (const auto& [kind, t] : report.per_task) r["accuracy"][std::string(to_string(kind))] = t.cell_accuracy();
        std::cout << report.to_table();
    }
    if (matrices) {
        const auto s = load_schedule(cfg.paths.schedule, out);
        HashedNgramEmbedder embedder(cfg.embed_dimension);
        const auto& attrs = default_matrix_attributes();
        const auto pearson = pearson_matrix(s, attrs);
        const auto cosine = cosine_matrix(s, attrs, embedder);
        out.write("pearson.txt", pearson.to_text());
        out.write("cosine.txt", cosine.to_text());
        r["attributes"] = attrs;
        std::cout << pearson.to_text() << cosine.to_text();
    }
    if (eval_file.empty() && !matrices) throw UsageError("MissingInput", "give --eval and/or --matrices");
    out.finish(r);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schedule reconstruction pipeline: synthetic data, graph analytics, retrieval, masked evaluation "
                 "and preference training.",
                 "constructa"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Overrides o;
    app.add_option("--config", o.config, "INI config file; flags override its values");
    app.add_option("--output-dir", o.output_dir, "Output root; each subcommand writes to <root>/<subcommand>/");

    auto schedule_opt = [&](CLI::App* sub) { sub->add_option("--schedule", o.schedule, "Schedule file (CSV or TSV)"); };
    auto seed_opt = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Collection-side seed (default 42)");
    };

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a seeded synthetic schedule");
    generate->add_option("--n", gen.n, "Number of activities")->capture_default_str();
    generate->add_option("--target-degree", gen.target_degree, "Target mean total degree (default 3.86)");
    generate->add_option("--window", gen.window, "Successor window in positions (default 20)");
    seed_opt(generate);

    auto* ingest = app.add_subcommand("ingest", "Parse and validate a schedule, write the canonical form");
    schedule_opt(ingest);

    std::string direction = "downstream";
    auto* analyze = app.add_subcommand("analyze-graph", "Degree and maximal-hop statistics of the dependency graph");
    schedule_opt(analyze);
    analyze->add_option("--direction", direction, "Hop direction: downstream or both")->capture_default_str();

    std::size_t chunk_tokens = 500;
    auto* build_kb = app.add_subcommand("build-kb", "Embed the term file and the chunked corpus");
    build_kb->add_option("--corpus-dir", o.corpus_dir, "Directory of reference documents");
    build_kb->add_option("--term-file", o.term_file, "Tab-separated term definitions");
    build_kb->add_option("--dim", o.dim, "Embedding dimension (default 256)");
    build_kb->add_option("--chunk-tokens", chunk_tokens, "Tokens per chunk")->capture_default_str();

    std::vector<std::string> targets;
    auto* sample = app.add_subcommand("sample-context", "Sample context bundles for activities");
    schedule_opt(sample);
    sample->add_option("--target", targets, "Activity id (repeatable; default all)");
    sample->add_option("--hops", o.hops, "Maximum sequential hops (default 3)");
    sample->add_option("--levels", o.levels, "WBS levels to walk up (default 2)");
    sample->add_option("--paths", o.paths, "Paths per direction (default 5)");
    seed_opt(sample);

    std::string kb_dir, rules_file;
    std::size_t limit = 0;
    auto gateway_opts = [&](CLI::App* sub) {
        sub->add_option("--gateway", o.gateway,
                        "mock:echo | mock:wrong | mock:replay:<file> | mock:stopword | mock:identity | http");
        sub->add_option("--inference-seed", o.inference_seed, "Seed forwarded to the endpoint (default 12345)");
        sub->add_option("--max-parallel", o.max_parallel, "Concurrent requests (default 4)");
        sub->add_option("--transcript-dir", o.transcript_dir, "Write transcripts here instead of the output dir");
    };
    auto* run_eval = app.add_subcommand("run-eval", "Masked-environment evaluation through a gateway");
    schedule_opt(run_eval);
    gateway_opts(run_eval);
    run_eval->add_option("--tasks", o.tasks, "Comma-separated tasks from MVP,DA,AP (default all)");
    run_eval->add_option("--k", o.k, "Ranked candidates scored per cell (default 2)");
    run_eval->add_option("--tolerance", o.tolerance, "Accept dates within this many days");
    run_eval->add_option("--kb-dir", kb_dir, "build-kb output directory for static knowledge");
    run_eval->add_option("--rules", rules_file, "Text file placed in the RULES section");
    run_eval->add_option("--limit", limit, "Evaluate only the first N activities per task (0 = all)");
    seed_opt(run_eval);

    std::vector<std::string> eval_files;
    auto* collect = app.add_subcommand("collect-prefs", "Harvest preference pairs from evaluated instances");
    collect->add_option("--eval", eval_files, "eval_instances.jsonl from run-eval (repeatable)");
    collect->add_option("--db", o.preference_db, "Preference database to append to");
    collect->add_flag("--synthesize", o.synthesize, "Pair correct answers against a synthesized corruption");
    seed_opt(collect);

    std::string prefs;
    auto* train = app.add_subcommand("train-scorer", "Train the logistic preference scorer");
    train->add_option("--prefs", prefs, "Preference database (default paths.preference_db)");
    train->add_option("--epochs-sft", o.epochs_sft, "Supervised epochs (default 10)");
    train->add_option("--epochs", o.epochs, "Preference epochs (default 10)");
    train->add_option("--lr", o.learning_rate, "Learning rate (default 0.5)");
    train->add_option("--alpha", o.alpha, "Weight of the context-rule term (default 0.5)");
    train->add_option("--beta", o.beta, "Weight of the preference term (default 1.0)");
    train->add_option("--rule-loss", o.rule_loss, "Context-rule term: zero or rule_applicability");
    train->add_option("--dim", o.dim, "Embedding dimension (default 256)");
    seed_opt(train);

    std::size_t bin_width = 50;
    auto* polish = app.add_subcommand("polish", "Polish task contexts and record token lengths");
    schedule_opt(polish);
    gateway_opts(polish);
    polish->add_option("--tasks", o.tasks, "Comma-separated source tasks from MVP,DA,AP (default all)");
    polish->add_option("--kb-dir", kb_dir, "build-kb output directory for static knowledge");
    polish->add_option("--limit", limit, "Polish only the first N activities per task (0 = all)");
    polish->add_option("--bin-width", bin_width, "Histogram bin width in tokens")->capture_default_str();
    seed_opt(polish);

    std::string report_eval;
    bool matrices = false;
    auto* report = app.add_subcommand("report", "Score tables and attribute correlation matrices");
    report->add_option("--eval", report_eval, "eval_instances.jsonl to summarize");
    report->add_flag("--matrices", matrices, "Also write Pearson and cosine attribute matrices for --schedule");
    schedule_opt(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorClass::Usage);
    }

    try {
        const auto cfg = resolve(o);
        if (*generate) return cmd_generate(cfg, gen);
        if (*ingest) return cmd_ingest(cfg);
        if (*analyze) return cmd_analyze(cfg, direction);
        if (*build_kb) return cmd_build_kb(cfg, chunk_tokens);
        if (*sample) return cmd_sample(cfg, targets);
        if (*run_eval) return cmd_run_eval(cfg, kb_dir, rules_file, limit);
        if (*collect) return cmd_collect(cfg, eval_files);
        if (*train) return cmd_train(cfg, prefs);
        if (*polish) return cmd_polish(cfg, kb_dir, limit, bin_width);
        if (*report) return cmd_report(cfg, report_eval, matrices);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return static_cast<int>(ErrorClass::Internal);
    }
    return static_cast<int>(ErrorClass::Internal);
}
