#include "constructa/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <functional>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "constructa/util.hpp"

namespace constructa {

namespace pt = boost::property_tree;

std::vector<TaskKind> parse_task_list(std::string_view text) {
    std::vector<TaskKind> out;
    for (const auto& part : split(text, ',')) {
        const auto name = trim(part);
        if (name.empty()) continue;
        const auto k = parse_task_kind(name);
        if (!k || *k == TaskKind::Polish)
            throw UsageError("InvalidConfig", "unknown evaluation task '" + std::string(name) + "'");
        if (std::find(out.begin(), out.end(), *k) == out.end()) out.push_back(*k);
    }
    if (out.empty()) throw UsageError("InvalidConfig", "task list is empty");
    return out;
}

namespace {

std::string task_list_text(const std::vector<TaskKind>& tasks) {
    std::vector<std::string> names;
    for (const auto t : tasks) names.emplace_back(to_string(t));
    return join(names, ",");
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto v = trim(value);
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end || v.empty())
        throw UsageError("InvalidConfig", "key '" + key + "' expects a number, got '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const auto v = casefold(trim(value));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("InvalidConfig", "key '" + key + "' expects true/false, got '" + value + "'");
}

// A key's name and how to assign it.
struct Key {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> k = [] {
        std::vector<Key> v;
        auto str = [&](std::string name, auto member) {
            v.push_back({name, [member](RunConfig& c, const std::string& s) { member(c) = s; },
                         [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }});
        };
        auto integer = [&](std::string name, auto member) {
            v.push_back({name,
                         [member, name](RunConfig& c, const std::string& s) {
                             using T = std::remove_reference_t<decltype(member(c))>;
                             member(c) = parse_number<T>(name, s);
                         },
                         [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }});
        };
        auto real = [&](std::string name, auto member) {
            v.push_back({name, [member, name](RunConfig& c, const std::string& s) { member(c) = parse_number<double>(name, s); },
                         [member](const RunConfig& c) { return num(member(const_cast<RunConfig&>(c))); }});
        };
        auto boolean = [&](std::string name, auto member) {
            v.push_back({name, [member, name](RunConfig& c, const std::string& s) { member(c) = parse_bool(name, s); },
                         [member](const RunConfig& c) {
                             return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
                         }});
        };

        str("paths.schedule", [](RunConfig& c) -> std::string& { return c.paths.schedule; });
        str("paths.corpus_dir", [](RunConfig& c) -> std::string& { return c.paths.corpus_dir; });
        str("paths.term_file", [](RunConfig& c) -> std::string& { return c.paths.term_file; });
        str("paths.preference_db", [](RunConfig& c) -> std::string& { return c.paths.preference_db; });
        str("paths.transcript_dir", [](RunConfig& c) -> std::string& { return c.paths.transcript_dir; });
        str("paths.output_dir", [](RunConfig& c) -> std::string& { return c.paths.output_dir; });

        str("gateway.selector", [](RunConfig& c) -> std::string& { return c.gateway_selector; });
        str("gateway.endpoint_url", [](RunConfig& c) -> std::string& { return c.gateway.endpoint_url; });
        str("gateway.model", [](RunConfig& c) -> std::string& { return c.gateway.model_name; });
        real("gateway.temperature", [](RunConfig& c) -> double& { return c.gateway.temperature; });
        integer("gateway.seed", [](RunConfig& c) -> std::uint64_t& { return c.gateway.request_seed; });
        boolean("gateway.forward_seed", [](RunConfig& c) -> bool& { return c.gateway.forward_seed; });
        integer("gateway.max_parallel", [](RunConfig& c) -> int& { return c.gateway.max_parallel; });
        integer("gateway.timeout_seconds", [](RunConfig& c) -> int& { return c.gateway.timeout_seconds; });
        integer("gateway.retry_limit", [](RunConfig& c) -> int& { return c.gateway.retry_limit; });
        integer("gateway.backoff_ms", [](RunConfig& c) -> int& { return c.gateway.backoff_ms; });
        str("gateway.api_key_env", [](RunConfig& c) -> std::string& { return c.gateway.api_key_env; });

        integer("sampler.max_sequential_hops", [](RunConfig& c) -> int& { return c.sampler.max_sequential_hops; });
        integer("sampler.max_wbs_levels", [](RunConfig& c) -> int& { return c.sampler.max_wbs_levels; });
        integer("sampler.paths_per_direction", [](RunConfig& c) -> int& { return c.sampler.paths_per_direction; });
        integer("sampler.seed", [](RunConfig& c) -> std::uint64_t& { return c.sampler.rng_seed; });

        v.push_back({"eval.tasks", [](RunConfig& c, const std::string& s) { c.eval.tasks = parse_task_list(s); },
                     [](const RunConfig& c) { return task_list_text(c.eval.tasks); }});
        integer("eval.k", [](RunConfig& c) -> std::size_t& { return c.eval.k; });
        integer("eval.seed", [](RunConfig& c) -> std::uint64_t& { return c.eval.seed; });
        v.push_back({"eval.date_tolerance_days",
                     [](RunConfig& c, const std::string& s) {
                         if (trim(s).empty() || trim(s) == "none") c.eval.date_tolerance_days.reset();
                         else c.eval.date_tolerance_days = parse_number<int>("eval.date_tolerance_days", s);
                     },
                     [](const RunConfig& c) {
                         return c.eval.date_tolerance_days ? std::to_string(*c.eval.date_tolerance_days)
                                                           : std::string("none");
                     }});
        boolean("eval.synthesize_negatives", [](RunConfig& c) -> bool& { return c.eval.synthesize_negatives; });

        real("loss.alpha", [](RunConfig& c) -> double& { return c.loss.weights.alpha; });
        real("loss.beta", [](RunConfig& c) -> double& { return c.loss.weights.beta; });
        integer("loss.epochs_sft", [](RunConfig& c) -> std::size_t& { return c.loss.epochs_sft; });
        integer("loss.epochs", [](RunConfig& c) -> std::size_t& { return c.loss.epochs; });
        real("loss.learning_rate", [](RunConfig& c) -> double& { return c.loss.learning_rate; });
        str("loss.rule_loss", [](RunConfig& c) -> std::string& { return c.loss.rule_loss; });
        integer("loss.seed", [](RunConfig& c) -> std::uint64_t& { return c.loss.seed; });

        integer("embed.dimension", [](RunConfig& c) -> std::size_t& { return c.embed_dimension; });
        return v;
    }();
    return k;
}

}  // namespace

RunConfig RunConfig::from_ini_text(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw UsageError("InvalidConfig", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    std::map<std::string, const Key*> by_name;
    for (const auto& k : keys()) by_name[k.name] = &k;

    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw UsageError("InvalidConfig", "key '" + section + "' is outside any section");
        for (const auto& [key, value] : body) {
            const auto full = section + "." + key;
            const auto it = by_name.find(full);
            if (it == by_name.end()) throw UsageError("InvalidConfig", "unknown key '" + full + "'");
            it->second->set(cfg, value.data());
        }
    }
    cfg.check();
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("MissingFile", "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_ini_text(ss.str());
}

std::string RunConfig::to_ini() const {
    std::string out, current;
    for (const auto& k : keys()) {
        const auto dot = k.name.find('.');
        const auto section = k.name.substr(0, dot);
        if (section != current) {
            if (!current.empty()) out += "\n";
            out += "[" + section + "]\n";
            current = section;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(*this) + "\n";
    }
    return out;
}

std::string RunConfig::hash() const { return sha256_hex(to_ini()); }

void RunConfig::check() const {
    gateway.check();
    sampler.check();
    loss.weights.check();
    if (eval.k < 1) throw UsageError("InvalidConfig", "eval.k must be >= 1");
    if (eval.tasks.empty()) throw UsageError("InvalidConfig", "eval.tasks is empty");
    if (embed_dimension < 1 || embed_dimension > (1u << 20))
        throw UsageError("InvalidConfig", "embed.dimension must be in [1, 1048576]");
    if (!(loss.learning_rate >= 0)) throw UsageError("InvalidConfig", "loss.learning_rate must be >= 0");
    make_rule_loss(loss.rule_loss);
    if (eval.date_tolerance_days && *eval.date_tolerance_days < 0)
        throw UsageError("InvalidConfig", "eval.date_tolerance_days must be >= 0");
}

}  // namespace constructa
