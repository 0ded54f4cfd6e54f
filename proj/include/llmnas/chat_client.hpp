#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llmnas/llm.hpp"

namespace llmnas {

class LlmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Network or HTTP failure. Transient failures (connection errors, 429, 5xx)
// are retried by request_completion.
class TransportError : public LlmError {
public:
    TransportError(const std::string& what, bool transient)
        : LlmError("transport-error: " + what), transient_(transient) {}
    bool transient() const { return transient_; }

private:
    bool transient_;
};

class EmptyCompletion : public LlmError {
public:
    EmptyCompletion() : LlmError("empty-completion: first choice has no content") {}
};

class RetryExhausted : public LlmError {
public:
    explicit RetryExhausted(const std::string& last)
        : LlmError("retry-exhausted: " + last) {}
};

// Carries one chat-completions request body and returns the response body.
class Transport {
public:
    virtual ~Transport() = default;
    virtual nlohmann::json post(const nlohmann::json& request) = 0;
    virtual std::size_t network_calls() const = 0;
};

// POSTs to <endpoint>/v1/chat/completions. Bearer token from the api key when
// non-empty.
class HttpTransport final : public Transport {
public:
    HttpTransport(std::string endpoint, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(300));
    nlohmann::json post(const nlohmann::json& request) override;
    std::size_t network_calls() const override { return calls_.load(); }

private:
    std::string base_;
    std::string path_;
    std::string api_key_;
    std::chrono::seconds timeout_;
    std::atomic<std::size_t> calls_{0};
};

// Replies scripted in request order. Each script entry is either
// {"content": "..."} or {"error": "..."} (a transient transport failure).
class MockTransport final : public Transport {
public:
    struct Entry {
        std::string content;
        bool fail = false;
    };

    explicit MockTransport(std::vector<Entry> script);
    // One JSON object per line.
    static std::unique_ptr<MockTransport> from_file(const std::filesystem::path& path);

    nlohmann::json post(const nlohmann::json& request) override;
    std::size_t network_calls() const override { return 0; }

    std::vector<nlohmann::json> requests() const;
    std::size_t remaining() const;

private:
    mutable std::mutex mu_;
    std::vector<Entry> script_;
    std::size_t cursor_ = 0;
    std::vector<nlohmann::json> requests_;
};

struct RetryPolicy {
    int retries = 3;  // attempts after the first one
    std::chrono::milliseconds backoff{500};  // doubled after each failure
};

nlohmann::json chat_request_body(const ChatTranscript& transcript, const DecodingParams& decoding);

std::string request_completion(Transport& transport, const ChatTranscript& transcript,
                               const DecodingParams& decoding, const RetryPolicy& retry = {});

struct LlmSettings {
    std::string transport = "http";  // "http" | "mock"
    std::string endpoint = "http://localhost:8000";
    std::string script_path;
    std::string api_key_env = "LLMNAS_API_KEY";
    int timeout_seconds = 300;
    RetryPolicy retry;
};

std::unique_ptr<Transport> make_transport(const LlmSettings& settings);

struct Explanation {
    std::string candidate_id;
    std::string prompt;
    std::string response;
    std::string timestamp;
};

// Responses are recorded verbatim, never parsed.
Explanation explain(Transport& transport, const ArchitectureConfig& arch,
                    const DecodingParams& decoding, const RetryPolicy& retry = {});

std::string utc_timestamp();

}  // namespace llmnas
