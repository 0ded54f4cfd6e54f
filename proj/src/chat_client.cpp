#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "llmnas/chat_client.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include <httplib.h>

namespace llmnas {

using nlohmann::json;

HttpTransport::HttpTransport(std::string endpoint, std::string api_key,
                             std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
    const auto scheme = endpoint.find("://");
    const auto path_start =
        endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    base_ = endpoint.substr(0, path_start);
    path_ = (path_start == std::string::npos ? std::string() : endpoint.substr(path_start)) +
            "/v1/chat/completions";
}

json HttpTransport::post(const json& request) {
    ++calls_;
    httplib::Client cli(base_);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(std::chrono::seconds(30));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = cli.Post(path_, headers, request.dump(), "application/json");
    if (!res) throw TransportError(httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500)
        throw TransportError("HTTP " + std::to_string(res->status), true);
    if (res->status < 200 || res->status >= 300)
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw TransportError("response is not JSON", false);
    return body;
}

MockTransport::MockTransport(std::vector<Entry> script) : script_(std::move(script)) {}

std::unique_ptr<MockTransport> MockTransport::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mock script: " + path.string());
    std::vector<Entry> script;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (!j.is_object())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected a JSON object");
        if (j.contains("error")) script.push_back({j["error"].get<std::string>(), true});
        else script.push_back({j.at("content").get<std::string>(), false});
    }
    return std::make_unique<MockTransport>(std::move(script));
}

json MockTransport::post(const json& request) {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
    if (cursor_ >= script_.size()) throw TransportError("mock script exhausted", false);
    const Entry& e = script_[cursor_++];
    if (e.fail) throw TransportError("scripted failure: " + e.content, true);
    return json{{"choices", json::array({json{{"index", 0},
                                              {"message", {{"role", "assistant"},
                                                           {"content", e.content}}}}})}};
}

std::vector<json> MockTransport::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::size_t MockTransport::remaining() const {
    std::lock_guard lock(mu_);
    return script_.size() - cursor_;
}

json chat_request_body(const ChatTranscript& transcript, const DecodingParams& decoding) {
    check_decoding(decoding);
    json body;
    body["model"] = decoding.model_name;
    body["messages"] = transcript_to_json(transcript);
    body["temperature"] = decoding.temperature;
    if (decoding.send_min_p) body["min_p"] = decoding.min_p;
    body["max_tokens"] = decoding.max_tokens;
    return body;
}

std::string request_completion(Transport& transport, const ChatTranscript& transcript,
                               const DecodingParams& decoding, const RetryPolicy& retry) {
    if (transcript.messages.empty()) throw std::invalid_argument("empty transcript");
    const json body = chat_request_body(transcript, decoding);
    auto backoff = retry.backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= retry.retries; ++attempt) {
        if (attempt > 0 && backoff.count() > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        json response;
        try {
            response = transport.post(body);
        } catch (const TransportError& e) {
            if (!e.transient()) throw;
            last_error = e.what();
            continue;
        }
        const json* content = nullptr;
        if (auto c = response.find("choices"); c != response.end() && c->is_array() && !c->empty()) {
            const json& first = c->front();
            if (auto m = first.find("message"); m != first.end() && m->is_object()) {
                if (auto t = m->find("content"); t != m->end() && t->is_string()) content = &*t;
            }
        }
        if (!content || content->get_ref<const std::string&>().empty()) throw EmptyCompletion();
        return content->get<std::string>();
    }
    throw RetryExhausted(last_error);
}

std::unique_ptr<Transport> make_transport(const LlmSettings& settings) {
    if (settings.transport == "mock") {
        if (settings.script_path.empty())
            throw std::invalid_argument("llm.transport = mock requires llm.script_path");
        return MockTransport::from_file(settings.script_path);
    }
    if (settings.transport != "http")
        throw std::invalid_argument("unknown llm.transport: " + settings.transport);
    std::string key;
    if (const char* v = std::getenv(settings.api_key_env.c_str())) key = v;
    return std::make_unique<HttpTransport>(settings.endpoint, key,
                                           std::chrono::seconds(settings.timeout_seconds));
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() %
        1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms));
    return buf;
}

Explanation explain(Transport& transport, const ArchitectureConfig& arch,
                    const DecodingParams& decoding, const RetryPolicy& retry) {
    const ChatTranscript prompt = build_explanation_prompt(arch);
    Explanation ex;
    ex.candidate_id = arch.candidate_id;
    ex.prompt = prompt.messages.back().content;
    ex.response = request_completion(transport, prompt, decoding, retry);
    ex.timestamp = utc_timestamp();
    return ex;
}

}  // namespace llmnas
