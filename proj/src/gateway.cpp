#include "constructa/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "constructa/prompts.hpp"
#include "constructa/util.hpp"
#include "http_util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace constructa {

void GatewayConfig::check() const {
    if (max_parallel < 1 || max_parallel > 64)
        throw UsageError("InvalidGatewayConfig", "max_parallel must be in [1, 64]");
    if (retry_limit < 0 || retry_limit > 5) throw UsageError("InvalidGatewayConfig", "retry_limit must be in [0, 5]");
    if (!(temperature >= 0.0)) throw UsageError("InvalidGatewayConfig", "temperature must be >= 0");
    if (timeout_seconds < 1) throw UsageError("InvalidGatewayConfig", "timeout_seconds must be >= 1");
    if (backoff_ms < 0) throw UsageError("InvalidGatewayConfig", "backoff_ms must be >= 0");
}

// ---- transcript records -------------------------------------------------------

namespace {

nlohmann::ordered_json exchange_json(const ChatExchange& e) {
    nlohmann::ordered_json j;
    j["id"] = e.transcript_id;
    j["seq"] = e.sequence;
    j["model"] = e.model;
    j["system"] = e.system_text;
    j["user"] = e.user_text;
    j["response"] = e.response_text ? nlohmann::ordered_json(*e.response_text) : nlohmann::ordered_json(nullptr);
    j["error"] = e.error ? nlohmann::ordered_json(*e.error) : nlohmann::ordered_json(nullptr);
    j["latency_ms"] = e.latency_ms;
    j["usage"] = {{"prompt_tokens", e.usage.prompt_tokens}, {"completion_tokens", e.usage.completion_tokens}};
    return j;
}

}  // namespace

std::string exchange_hash(const ChatExchange& e) { return sha256_hex(exchange_json(e).dump()); }

std::string exchange_to_record(const ChatExchange& e) {
    auto j = exchange_json(e);
    j["hash"] = e.content_hash.empty() ? exchange_hash(e) : e.content_hash;
    return j.dump();
}

ChatExchange exchange_from_record(std::string_view line) {
    ChatExchange e;
    try {
        const auto j = nlohmann::json::parse(line);
        e.transcript_id = j.at("id").get<std::string>();
        e.sequence = j.at("seq").get<std::uint64_t>();
        e.model = j.at("model").get<std::string>();
        e.system_text = j.at("system").get<std::string>();
        e.user_text = j.at("user").get<std::string>();
        if (!j.at("response").is_null()) e.response_text = j.at("response").get<std::string>();
        if (!j.at("error").is_null()) e.error = j.at("error").get<std::string>();
        e.latency_ms = j.at("latency_ms").get<double>();
        e.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<int>();
        e.usage.completion_tokens = j.at("usage").at("completion_tokens").get<int>();
        e.content_hash = j.at("hash").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw DataError("CorruptRecord", ex.what());
    }
    if (e.response_text.has_value() == e.error.has_value())
        throw DataError("CorruptRecord", "exactly one of response/error must be present");
    if (exchange_hash(e) != e.content_hash) throw DataError("CorruptRecord", "content hash mismatch");
    return e;
}

TranscriptLog::TranscriptLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream(*path_, std::ios::trunc);
}

std::uint64_t TranscriptLog::reserve(std::uint64_t n) {
    std::lock_guard lock(mu_);
    const auto first = next_reserve_;
    next_reserve_ += n;
    return first;
}

void TranscriptLog::record(ChatExchange exchange) {
    std::lock_guard lock(mu_);
    if (exchange.sequence >= next_reserve_) next_reserve_ = exchange.sequence + 1;
    const auto seq = exchange.sequence;
    held_[seq] = std::move(exchange);
    flush_ready();
}

void TranscriptLog::skip(std::uint64_t sequence) {
    std::lock_guard lock(mu_);
    held_[sequence] = std::nullopt;
    flush_ready();
}

void TranscriptLog::flush_ready() {
    std::ofstream out;
    if (path_) out.open(*path_, std::ios::app);
    for (auto it = held_.find(next_write_); it != held_.end(); it = held_.find(next_write_)) {
        if (it->second) {
            if (path_) out << exchange_to_record(*it->second) << '\n' << std::flush;
            written_.push_back(std::move(*it->second));
        }
        held_.erase(it);
        ++next_write_;
    }
}

std::vector<ChatExchange> TranscriptLog::records() const {
    std::lock_guard lock(mu_);
    return written_;
}

std::size_t TranscriptLog::pending() const {
    std::lock_guard lock(mu_);
    return held_.size();
}

std::vector<ChatExchange> TranscriptLog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("MissingFile", "cannot read transcript " + path.string());
    std::vector<ChatExchange> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(exchange_from_record(line));
        } catch (const DataError& e) {
            throw DataError("CorruptRecord", path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

// ---- HTTP backend ---------------------------------------------------------------

BackendReply HttpChatBackend::send(const GatewayConfig& cfg, std::string_view system_text,
                                   std::string_view user_text) {
    const auto url = detail::split_url(cfg.endpoint_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(cfg.timeout_seconds);
    client.set_read_timeout(cfg.timeout_seconds);
    client.set_write_timeout(cfg.timeout_seconds);

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    nlohmann::json body{{"model", cfg.model_name},
                        {"temperature", cfg.temperature},
                        {"messages",
                         {{{"role", "system"}, {"content", system_text}}, {{"role", "user"}, {"content", user_text}}}}};
    if (cfg.forward_seed) body["seed"] = cfg.request_seed;

    const auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write ||
            err == httplib::Error::ConnectionTimeout)
            throw GatewayError("Timeout", "request timed out: " + httplib::to_string(err), true);
        throw GatewayError("Connection", "request failed: " + httplib::to_string(err), true);
    }
    if (res->status < 200 || res->status >= 300) {
        const bool transient = res->status == 429 || res->status >= 500;
        throw GatewayError("HttpStatus", "endpoint returned HTTP " + std::to_string(res->status), transient,
                           res->status);
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        BackendReply reply;
        reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            reply.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            reply.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        return reply;
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError("MalformedResponse", e.what());
    }
}

// ---- gateway ---------------------------------------------------------------------

Gateway::Gateway(GatewayConfig cfg, std::unique_ptr<ChatBackend> backend, std::shared_ptr<TranscriptLog> log)
    : cfg_(std::move(cfg)), backend_(std::move(backend)), log_(std::move(log)), slots_(0) {
    cfg_.check();
    if (!backend_) throw UsageError("InvalidGatewayConfig", "gateway needs a backend");
    if (!log_) log_ = std::make_shared<TranscriptLog>();
    slots_.release(cfg_.max_parallel);
}

ChatExchange Gateway::complete(std::string_view system_text, std::string_view user_text, CallTag tag) {
    ChatExchange ex;
    ex.sequence = tag.sequence ? *tag.sequence : log_->reserve(1);
    ex.transcript_id = tag.transcript_id.empty() ? "x" + std::to_string(ex.sequence) : tag.transcript_id;
    ex.model = cfg_.model_name;
    ex.system_text = std::string(system_text);
    ex.user_text = std::string(user_text);

    auto fail = [&](const GatewayError& err) {
        ex.error = err.what();
        ex.content_hash = exchange_hash(ex);
        log_->record(ex);
        throw err;
    };

    if (trim(system_text).empty() && trim(user_text).empty())
        fail(GatewayError("EmptyPrompt", "prompt is empty"));

    slots_.acquire();
    struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
    } release{slots_};

    const auto t0 = std::chrono::steady_clock::now();
    for (int attempt = 0;; ++attempt) {
        try {
            auto reply = backend_->send(cfg_, system_text, user_text);
            if (backend_->measures_latency())
                ex.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            ex.response_text = std::move(reply.text);
            ex.usage = reply.usage;
            ex.content_hash = exchange_hash(ex);
            log_->record(ex);
            return ex;
        } catch (const GatewayError& err) {
            if (!err.transient()) fail(err);
            if (attempt >= cfg_.retry_limit)
                fail(GatewayError("RetriesExhausted", "gave up after " + std::to_string(attempt + 1) +
                                                          " attempt(s); last error: " + err.what()));
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(cfg_.backoff_ms) << attempt));
        }
    }
}

// ---- mocks -----------------------------------------------------------------------

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> words{
        "a",    "an",   "and",  "are",  "as",   "at",    "be",    "by",   "for",  "from", "has",
        "in",   "is",   "it",   "its",  "of",   "on",    "or",    "that", "the",  "their", "these",
        "this", "to",   "was",  "were", "will", "with",  "which", "into", "than", "then",  "there",
        "been", "being", "such", "can", "should", "would", "may", "also", "any",  "all",   "each"};
    return words;
}

namespace {

struct RowCells {
    std::string activity_id;
    std::vector<std::string> masked_columns;
};

RowCells read_row(std::string_view user_text) {
    const auto sections = extract_sections(user_text);
    if (!sections) throw GatewayError("MockContract", "prompt has no ROW section");
    RowCells cells;
    for (const auto& raw : split(sections->row, '\n')) {
        const auto line = trim(raw);
        const auto colon = line.find(": ");
        if (colon == std::string_view::npos) continue;
        const auto col = std::string(line.substr(0, colon));
        const auto val = trim(line.substr(colon + 2));
        if (val == kMaskedCell) cells.masked_columns.push_back(col);
        else if (col == "Activity ID") cells.activity_id = std::string(val);
    }
    return cells;
}

std::string value_list(const std::vector<std::string>& values) {
    std::vector<std::string> tagged;
    for (const auto& v : values) tagged.push_back("[Value]" + v + "[/Value]");
    return join(tagged, ", ");
}

Usage count_usage(std::string_view system_text, std::string_view user_text, std::string_view reply) {
    return {static_cast<int>(token_count(system_text) + token_count(user_text)), static_cast<int>(token_count(reply))};
}

class EchoOracleBackend final : public ChatBackend {
public:
    explicit EchoOracleBackend(GroundTruthTable truth) : truth_(std::move(truth)) {}
    BackendReply send(const GatewayConfig&, std::string_view system_text, std::string_view user_text) override {
        const auto cells = read_row(user_text);
        const auto row = truth_.find(cells.activity_id);
        if (row == truth_.end())
            throw GatewayError("MockContract", "no ground truth for activity '" + cells.activity_id + "'");
        if (cells.masked_columns.empty()) throw GatewayError("MockContract", "row has no masked cells");
        std::vector<std::string> values;
        for (const auto& c : cells.masked_columns) {
            const auto v = row->second.find(c);
            if (v == row->second.end())
                throw GatewayError("MockContract", "no ground truth for column '" + c + "'");
            values.push_back(v->second);
        }
        auto text = value_list(values);
        return {text, count_usage(system_text, user_text, text)};
    }

private:
    GroundTruthTable truth_;
};

class ConstantWrongBackend final : public ChatBackend {
public:
    BackendReply send(const GatewayConfig&, std::string_view system_text, std::string_view user_text) override {
        const auto cells = read_row(user_text);
        const auto arity = std::max<std::size_t>(1, cells.masked_columns.size());
        auto text = value_list(std::vector<std::string>(arity, "__WRONG__"));
        return {text, count_usage(system_text, user_text, text)};
    }
};

class ScriptedTranscriptBackend final : public ChatBackend {
public:
    explicit ScriptedTranscriptBackend(std::vector<ChatExchange> script)
        : script_(std::move(script)), used_(script_.size(), false) {}

    BackendReply send(const GatewayConfig&, std::string_view system_text, std::string_view user_text) override {
        std::lock_guard lock(mu_);
        if (consumed_ == script_.size())
            throw GatewayError("TranscriptExhausted", "all " + std::to_string(script_.size()) +
                                                          " scripted exchange(s) already replayed");
        for (std::size_t i = 0; i < script_.size(); ++i) {
            if (used_[i] || script_[i].system_text != system_text || script_[i].user_text != user_text) continue;
            used_[i] = true;
            ++consumed_;
            if (!script_[i].response_text)
                throw GatewayError("MalformedResponse", "replayed error: " + script_[i].error.value_or(""));
            return {*script_[i].response_text, script_[i].usage};
        }
        throw GatewayError("TranscriptMismatch", "no unreplayed exchange matches this request");
    }

private:
    std::mutex mu_;
    std::vector<ChatExchange> script_;
    std::vector<bool> used_;
    std::size_t consumed_ = 0;
};

class PolisherBackend final : public ChatBackend {
public:
    explicit PolisherBackend(bool strip) : strip_(strip) {}
    BackendReply send(const GatewayConfig&, std::string_view system_text, std::string_view user_text) override {
        std::string text(sections_block(user_text));
        if (strip_) {
            const std::set<std::string> stop(stopwords().begin(), stopwords().end());
            std::vector<std::string> kept;
            for (auto& tok : tokenize(text))
                if (!stop.count(casefold(tok))) kept.push_back(std::move(tok));
            text = join(kept, " ");
        }
        return {text, count_usage(system_text, user_text, text)};
    }

private:
    bool strip_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_mock_backend(MockKind kind, const MockData& data) {
    switch (kind) {
        case MockKind::EchoOracle:
            if (!data.ground_truth) throw GatewayError("MissingMockData", "EchoOracle needs a ground-truth table");
            return std::make_unique<EchoOracleBackend>(*data.ground_truth);
        case MockKind::ConstantWrong:
            return std::make_unique<ConstantWrongBackend>();
        case MockKind::ScriptedTranscript:
            if (!data.transcript) throw GatewayError("MissingMockData", "ScriptedTranscript needs a transcript file");
            try {
                return std::make_unique<ScriptedTranscriptBackend>(TranscriptLog::load(*data.transcript));
            } catch (const DataError& e) {
                throw GatewayError("MissingMockData", e.what());
            }
        case MockKind::StopwordStripper:
            return std::make_unique<PolisherBackend>(true);
        case MockKind::Identity:
            return std::make_unique<PolisherBackend>(false);
    }
    throw InternalError("UnknownMock", "unhandled mock kind");
}

std::unique_ptr<Gateway> register_mock(MockKind kind, const MockData& data, GatewayConfig cfg,
                                       std::shared_ptr<TranscriptLog> log) {
    return std::make_unique<Gateway>(std::move(cfg), make_mock_backend(kind, data), std::move(log));
}

}  // namespace constructa
