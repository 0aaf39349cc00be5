#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "constructa/gateway.hpp"
#include "constructa/prompts.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace constructa;

namespace {

std::string code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

std::string row_prompt(const std::string& id, const std::vector<std::pair<std::string, std::string>>& cells) {
    std::string row = "Activity ID: " + id + "\n";
    for (const auto& [c, v] : cells) row += c + ": " + v + "\n";
    return build_task_prompt(TaskKind::DA, {row, "", "", ""}).user_text;
}

GroundTruthTable truth() { return {{"A1", {{"Level", "SF"}, {"Area", "6E"}}}}; }

GatewayConfig quick() {
    GatewayConfig c;
    c.backoff_ms = 1;
    return c;
}

// Fails `failures` times with the given error, then answers "ok".
class FlakyBackend : public ChatBackend {
public:
    FlakyBackend(int failures, bool transient, std::atomic<int>& calls)
        : failures_(failures), transient_(transient), calls_(calls) {}
    BackendReply send(const GatewayConfig&, std::string_view, std::string_view) override {
        if (calls_++ < failures_) throw GatewayError("Timeout", "flaky", transient_);
        return {"ok", {1, 1}};
    }

private:
    int failures_;
    bool transient_;
    std::atomic<int>& calls_;
};

class CountingBackend : public ChatBackend {
public:
    CountingBackend(std::atomic<int>& in_flight, std::atomic<int>& peak) : in_flight_(in_flight), peak_(peak) {}
    BackendReply send(const GatewayConfig&, std::string_view, std::string_view user) override {
        const int now = ++in_flight_;
        int p = peak_.load();
        while (now > p && !peak_.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --in_flight_;
        return {std::string(user), {}};
    }

private:
    std::atomic<int>& in_flight_;
    std::atomic<int>& peak_;
};

}  // namespace

TEST(Config, RangeChecks) {
    GatewayConfig c;
    c.check();
    c.max_parallel = 0;
    EXPECT_THROW(c.check(), UsageError);
    c = {};
    c.retry_limit = 6;
    EXPECT_THROW(c.check(), UsageError);
    c = {};
    c.temperature = -0.1;
    EXPECT_THROW(c.check(), UsageError);
}

TEST(Records, RoundTripAndTamperDetection) {
    ChatExchange e;
    e.transcript_id = "MVP:A1";
    e.sequence = 7;
    e.model = "m";
    e.system_text = "sys";
    e.user_text = "user\nline";
    e.response_text = "[Value]x[/Value]";
    e.usage = {3, 1};
    e.content_hash = exchange_hash(e);
    const auto line = exchange_to_record(e);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(exchange_from_record(line), e);

    auto j = nlohmann::json::parse(line);
    j["response"] = "[Value]y[/Value]";
    EXPECT_EQ(code_of([&] { exchange_from_record(j.dump()); }), "CorruptRecord");
    EXPECT_EQ(code_of([&] { exchange_from_record("{"); }), "CorruptRecord");
}

TEST(Transcript, WritesInSequenceOrder) {
    const auto dir = fixtures::temp_dir("transcript_order");
    TranscriptLog log(dir / "t.jsonl");
    const auto first = log.reserve(3);
    auto ex = [](std::uint64_t seq) {
        ChatExchange e;
        e.sequence = seq;
        e.transcript_id = "x" + std::to_string(seq);
        e.response_text = "r";
        e.content_hash = exchange_hash(e);
        return e;
    };
    log.record(ex(first + 2));
    EXPECT_EQ(log.records().size(), 0u);
    EXPECT_EQ(log.pending(), 1u);
    log.record(ex(first));
    log.skip(first + 1);
    EXPECT_EQ(log.pending(), 0u);
    const auto loaded = TranscriptLog::load(dir / "t.jsonl");
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].sequence, first);
    EXPECT_EQ(loaded[1].sequence, first + 2);
    EXPECT_EQ(loaded, log.records());

    std::ofstream(dir / "t.jsonl", std::ios::app) << "garbage\n";
    try {
        TranscriptLog::load(dir / "t.jsonl");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.code(), "CorruptRecord");
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
    }
    EXPECT_EQ(code_of([&] { TranscriptLog::load(dir / "absent.jsonl"); }), "MissingFile");
}

TEST(Mocks, EchoOracleAnswersMaskedCellsInRowOrder) {
    auto g = register_mock(MockKind::EchoOracle, {truth(), {}});
    const auto ex = g->complete("sys", row_prompt("A1", {{"Level", "[MASKED]"}, {"Area", "[MASKED]"}}));
    EXPECT_EQ(ex.response_text, std::optional<std::string>("[Value]SF[/Value], [Value]6E[/Value]"));
    EXPECT_EQ(ex.latency_ms, 0.0);
    EXPECT_GT(ex.usage.prompt_tokens, 0);
    EXPECT_EQ(code_of([&] { g->complete("s", row_prompt("Q9", {{"Level", "[MASKED]"}})); }), "MockContract");
    EXPECT_EQ(code_of([&] { g->complete("s", row_prompt("A1", {{"Zone", "[MASKED]"}})); }), "MockContract");
    EXPECT_EQ(code_of([&] { register_mock(MockKind::EchoOracle, {}); }), "MissingMockData");
    EXPECT_EQ(g->transcript().records().size(), 3u);
}

TEST(Mocks, ConstantWrongMatchesArity) {
    auto g = register_mock(MockKind::ConstantWrong, {});
    const auto ex = g->complete("s", row_prompt("A1", {{"Level", "[MASKED]"}, {"Area", "[MASKED]"}}));
    EXPECT_EQ(*ex.response_text, "[Value]__WRONG__[/Value], [Value]__WRONG__[/Value]");
}

TEST(Mocks, PolishersReturnTheSectionsBlock) {
    const auto prompt = build_task_prompt(TaskKind::Polish, {"", "The lag of the link", "A and B", ""});
    auto id = register_mock(MockKind::Identity, {});
    EXPECT_EQ(*id->complete(prompt.system_text, prompt.user_text).response_text,
              std::string(sections_block(prompt.user_text)));
    auto strip = register_mock(MockKind::StopwordStripper, {});
    const auto out = *strip->complete(prompt.system_text, prompt.user_text).response_text;
    EXPECT_EQ(out.find(" the "), std::string::npos);
    EXPECT_EQ(out.find(" and "), std::string::npos);
    EXPECT_NE(out.find("lag"), std::string::npos);
    EXPECT_LE(token_count(out), token_count(sections_block(prompt.user_text)));
}

TEST(Mocks, ReplayReproducesTheTranscript) {
    const auto dir = fixtures::temp_dir("replay");
    {
        auto g = register_mock(MockKind::EchoOracle, {truth(), {}}, quick(),
                               std::make_shared<TranscriptLog>(dir / "first.jsonl"));
        g->complete("s", row_prompt("A1", {{"Level", "[MASKED]"}}));
        g->complete("s", row_prompt("A1", {{"Area", "[MASKED]"}}));
    }
    auto replay = register_mock(MockKind::ScriptedTranscript, {{}, dir / "first.jsonl"}, quick(),
                                std::make_shared<TranscriptLog>(dir / "second.jsonl"));
    replay->complete("s", row_prompt("A1", {{"Level", "[MASKED]"}}));
    EXPECT_EQ(code_of([&] { replay->complete("s", "unknown"); }), "TranscriptMismatch");
    replay->complete("s", row_prompt("A1", {{"Area", "[MASKED]"}}));
    EXPECT_EQ(code_of([&] { replay->complete("s", row_prompt("A1", {{"Area", "[MASKED]"}})); }),
              "TranscriptExhausted");
    const auto a = TranscriptLog::load(dir / "first.jsonl");
    const auto b = TranscriptLog::load(dir / "second.jsonl");
    ASSERT_EQ(b.size(), 4u);
    EXPECT_EQ(b[0], a[0]);
    EXPECT_EQ(b[2].response_text, a[1].response_text);
    EXPECT_TRUE(b[1].error);
    EXPECT_EQ(code_of([&] { register_mock(MockKind::ScriptedTranscript, {{}, dir / "none.jsonl"}); }),
              "MissingMockData");
}

TEST(Gateway, EmptyPromptIsRecordedAndRejected) {
    auto g = register_mock(MockKind::Identity, {});
    EXPECT_EQ(code_of([&] { g->complete(" ", "\n"); }), "EmptyPrompt");
    const auto recs = g->transcript().records();
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_TRUE(recs[0].error);
    EXPECT_FALSE(recs[0].response_text);
}

TEST(Gateway, RetriesTransientErrors) {
    std::atomic<int> calls{0};
    Gateway ok(quick(), std::make_unique<FlakyBackend>(2, true, calls));
    EXPECT_EQ(*ok.complete("s", "u").response_text, "ok");
    EXPECT_EQ(calls.load(), 3);
    EXPECT_EQ(ok.transcript().records().size(), 1u);

    calls = 0;
    auto cfg = quick();
    cfg.retry_limit = 1;
    Gateway gives_up(cfg, std::make_unique<FlakyBackend>(5, true, calls));
    EXPECT_EQ(code_of([&] { gives_up.complete("s", "u"); }), "RetriesExhausted");
    EXPECT_EQ(calls.load(), 2);

    calls = 0;
    Gateway permanent(quick(), std::make_unique<FlakyBackend>(5, false, calls));
    EXPECT_EQ(code_of([&] { permanent.complete("s", "u"); }), "Timeout");
    EXPECT_EQ(calls.load(), 1);
    EXPECT_EQ(permanent.transcript().records().size(), 1u);
}

TEST(Gateway, ConcurrencyNeverExceedsTheLimit) {
    std::atomic<int> in_flight{0}, peak{0};
    auto cfg = quick();
    cfg.max_parallel = 3;
    Gateway g(cfg, std::make_unique<CountingBackend>(in_flight, peak));
    std::vector<std::thread> threads;
    for (int t = 0; t < 24; ++t)
        threads.emplace_back([&, t] { g.complete("s", "u" + std::to_string(t)); });
    for (auto& t : threads) t.join();
    EXPECT_LE(peak.load(), 3);
    EXPECT_GE(peak.load(), 1);
    const auto recs = g.transcript().records();
    ASSERT_EQ(recs.size(), 24u);
    for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(recs[i].sequence, i);
}

class HttpGateway : public ::testing::Test {
protected:
    void SetUp() override {
        server_.Post("/ok", [this](const httplib::Request& req, httplib::Response& res) {
            last_body_ = req.body;
            last_auth_ = req.get_header_value("Authorization");
            res.set_content(R"({"choices":[{"message":{"content":"[Value]SF[/Value]"}}],)"
                            R"("usage":{"prompt_tokens":11,"completion_tokens":2}})",
                            "application/json");
        });
        server_.Post("/e500", [this](const httplib::Request&, httplib::Response& res) {
            ++hits_500_;
            res.status = 500;
        });
        server_.Post("/e400", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
        server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"choices\": []}", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void TearDown() override {
        server_.stop();
        thread_.join();
    }
    GatewayConfig at(const std::string& path) {
        auto c = quick();
        c.endpoint_url = "http://127.0.0.1:" + std::to_string(port_) + path;
        c.timeout_seconds = 5;
        return c;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::string last_body_, last_auth_;
    std::atomic<int> hits_500_{0};
};

TEST_F(HttpGateway, SendsOpenAiShapedRequest) {
    ::setenv("CONSTRUCTA_TEST_KEY", "sk-test", 1);
    auto cfg = at("/ok");
    cfg.api_key_env = "CONSTRUCTA_TEST_KEY";
    cfg.model_name = "model-x";
    Gateway g(cfg, std::make_unique<HttpChatBackend>());
    const auto ex = g.complete("system words", "user words");
    EXPECT_EQ(*ex.response_text, "[Value]SF[/Value]");
    EXPECT_EQ(ex.usage, (Usage{11, 2}));
    EXPECT_GE(ex.latency_ms, 0.0);
    const auto body = nlohmann::json::parse(last_body_);
    EXPECT_EQ(body["model"], "model-x");
    EXPECT_EQ(body["seed"], 12345);
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "user words");
    EXPECT_EQ(last_auth_, "Bearer sk-test");

    cfg.forward_seed = false;
    Gateway unseeded(cfg, std::make_unique<HttpChatBackend>());
    unseeded.complete("s", "u");
    EXPECT_FALSE(nlohmann::json::parse(last_body_).contains("seed"));
}

TEST_F(HttpGateway, MapsFailures) {
    auto cfg = at("/e500");
    cfg.retry_limit = 2;
    Gateway server_error(cfg, std::make_unique<HttpChatBackend>());
    EXPECT_EQ(code_of([&] { server_error.complete("s", "u"); }), "RetriesExhausted");
    EXPECT_EQ(hits_500_.load(), 3);

    Gateway client_error(at("/e400"), std::make_unique<HttpChatBackend>());
    try {
        client_error.complete("s", "u");
        FAIL();
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.code(), "HttpStatus");
        EXPECT_EQ(e.http_status(), 400);
        EXPECT_FALSE(e.transient());
    }

    Gateway malformed(at("/bad"), std::make_unique<HttpChatBackend>());
    EXPECT_EQ(code_of([&] { malformed.complete("s", "u"); }), "MalformedResponse");

    auto closed = quick();
    closed.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    closed.retry_limit = 0;
    closed.timeout_seconds = 2;
    Gateway refused(closed, std::make_unique<HttpChatBackend>());
    EXPECT_EQ(code_of([&] { refused.complete("s", "u"); }), "RetriesExhausted");
}
