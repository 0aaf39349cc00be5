#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "constructa/error.hpp"

namespace constructa {

struct GatewayConfig {
    std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
    std::string model_name = "gpt-4o";
    double temperature = 0.0;
    std::uint64_t request_seed = 12345;
    bool forward_seed = true;  // send `seed` in the request body
    int max_parallel = 4;
    int timeout_seconds = 60;
    int retry_limit = 3;
    int backoff_ms = 250;  // first retry delay; doubles per attempt
    std::string api_key_env = "CONSTRUCTA_API_KEY";

    /// Throws UsageError "InvalidGatewayConfig".
    void check() const;
};

/// Codes: Timeout, HttpStatus, Connection, MalformedResponse, RetriesExhausted,
/// TranscriptExhausted, TranscriptMismatch, MissingMockData, MockContract, EmptyPrompt.
class GatewayError : public Error {
public:
    GatewayError(std::string code, const std::string& message, bool transient = false, int http_status = 0)
        : Error(ErrorClass::Gateway, std::move(code), message), transient_(transient), http_status_(http_status) {}

    bool transient() const noexcept { return transient_; }
    int http_status() const noexcept { return http_status_; }

private:
    bool transient_;
    int http_status_;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    bool operator==(const Usage&) const = default;
};

struct ChatExchange {
    std::string transcript_id;
    std::uint64_t sequence = 0;
    std::string model;
    std::string system_text;
    std::string user_text;
    std::optional<std::string> response_text;  // present iff no error
    std::optional<std::string> error;
    double latency_ms = 0.0;
    Usage usage;
    std::string content_hash;

    bool operator==(const ChatExchange&) const = default;
};

/// SHA-256 over the canonical record without its hash field.
std::string exchange_hash(const ChatExchange& e);
std::string exchange_to_record(const ChatExchange& e);
/// Throws DataError "CorruptRecord" on bad JSON or hash mismatch.
ChatExchange exchange_from_record(std::string_view line);

/// Append-only transcript with a single serialized writer. Records are
/// written in sequence order: a record whose predecessors have not arrived yet
/// is held back until they do (or are skipped).
class TranscriptLog {
public:
    TranscriptLog() = default;
    explicit TranscriptLog(std::filesystem::path path);

    /// Reserves `n` consecutive sequence numbers; returns the first.
    std::uint64_t reserve(std::uint64_t n = 1);
    void record(ChatExchange exchange);
    /// Releases a reserved sequence number that will never be recorded.
    void skip(std::uint64_t sequence);

    /// Written records, in sequence order.
    std::vector<ChatExchange> records() const;
    std::size_t pending() const;
    const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

    /// Throws DataError "CorruptRecord" (with line number) or "MissingFile".
    static std::vector<ChatExchange> load(const std::filesystem::path& path);

private:
    void flush_ready();

    mutable std::mutex mu_;
    std::optional<std::filesystem::path> path_;
    std::uint64_t next_reserve_ = 0;
    std::uint64_t next_write_ = 0;
    std::map<std::uint64_t, std::optional<ChatExchange>> held_;
    std::vector<ChatExchange> written_;
};

struct BackendReply {
    std::string text;
    Usage usage;
};

/// One request/response round trip; throws GatewayError.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual BackendReply send(const GatewayConfig& cfg, std::string_view system_text,
                              std::string_view user_text) = 0;
    /// Mocks report zero latency so their transcripts are reproducible.
    virtual bool measures_latency() const { return false; }
};

/// OpenAI-compatible chat-completions over HTTP(S).
class HttpChatBackend final : public ChatBackend {
public:
    BackendReply send(const GatewayConfig& cfg, std::string_view system_text, std::string_view user_text) override;
    bool measures_latency() const override { return true; }
};

struct CallTag {
    std::string transcript_id;
    std::optional<std::uint64_t> sequence;  // reserved via TranscriptLog::reserve
};

/// Rate-limited, retrying, transcript-recording front of a backend.
class Gateway {
public:
    Gateway(GatewayConfig cfg, std::unique_ptr<ChatBackend> backend,
            std::shared_ptr<TranscriptLog> log = std::make_shared<TranscriptLog>());

    /// Records exactly one transcript entry per call, then returns or throws
    /// GatewayError.
    ChatExchange complete(std::string_view system_text, std::string_view user_text, CallTag tag = {});

    const GatewayConfig& config() const noexcept { return cfg_; }
    TranscriptLog& transcript() noexcept { return *log_; }
    std::shared_ptr<TranscriptLog> transcript_ptr() const noexcept { return log_; }

private:
    GatewayConfig cfg_;
    std::unique_ptr<ChatBackend> backend_;
    std::shared_ptr<TranscriptLog> log_;
    std::counting_semaphore<64> slots_;
};

/// activity id -> column -> canonical ground-truth value.
using GroundTruthTable = std::map<std::string, std::map<std::string, std::string>>;

enum class MockKind { EchoOracle, ConstantWrong, ScriptedTranscript, StopwordStripper, Identity };

struct MockData {
    std::optional<GroundTruthTable> ground_truth;  // EchoOracle
    std::optional<std::filesystem::path> transcript;  // ScriptedTranscript
};

/// Deterministic gateway honouring the same complete() contract.
/// Throws GatewayError "MissingMockData".
std::unique_ptr<Gateway> register_mock(MockKind kind, const MockData& data, GatewayConfig cfg = {},
                                       std::shared_ptr<TranscriptLog> log = std::make_shared<TranscriptLog>());

/// Backend used by register_mock; exposed for composing custom mocks.
std::unique_ptr<ChatBackend> make_mock_backend(MockKind kind, const MockData& data);

/// Words removed by the StopwordStripper polisher.
const std::vector<std::string>& stopwords();

}  // namespace constructa
