#include "evocaf/llm.hpp"

#include "evocaf/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

namespace evocaf::llm {

namespace {

using json = nlohmann::json;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

struct ParsedUrl {
    std::string scheme_host_port; // e.g. http://127.0.0.1:8080
    std::string path_prefix;      // e.g. /v1
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("base URL must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.scheme_host_port = url;
    } else {
        out.scheme_host_port = url.substr(0, path_start);
        out.path_prefix = url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/')
            out.path_prefix.pop_back();
    }
    return out;
}

class HttpProvider final : public HttpProviderBase {
public:
    explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty())
            throw ConfigError("LLM base URL not configured (EVOCAF_LLM_BASE_URL)");
        if (config_.api_key.empty())
            throw ConfigError("LLM API key not configured (EVOCAF_LLM_API_KEY)");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (config_.base_url.rfind("https://", 0) == 0)
            throw ConfigError("built without TLS support; use an http:// endpoint");
#endif
    }

    std::string name() const override { return "http"; }

    std::vector<HttpAttempt> attempts() const override {
        std::lock_guard<std::mutex> lock(mutex_);
        return attempts_;
    }

    LlmResponse complete(const LlmRequest& req) override {
        if (req.system_prompt.empty() && req.user_prompt.empty())
            throw ConfigError("prompts must be non-empty");
        if (req.temperature < 0.0 || req.temperature > 2.0)
            throw ConfigError("temperature must lie in [0, 2]");

        const ParsedUrl url = split_url(config_.base_url);
        httplib::Client client(url.scheme_host_port);
        client.set_read_timeout(120, 0);
        client.set_connection_timeout(10, 0);

        json body;
        body["model"] = req.model_name.empty() ? config_.model : req.model_name;
        body["messages"] = json::array();
        if (!req.system_prompt.empty())
            body["messages"].push_back({{"role", "system"}, {"content", req.system_prompt}});
        body["messages"].push_back({{"role", "user"}, {"content", req.user_prompt}});
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_tokens;

        httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};
        const std::string path = url.path_prefix + "/chat/completions";

        const std::uint64_t request_hash =
            std::hash<std::string>{}(req.system_prompt + "\x1f" + req.user_prompt);

        double backoff = config_.backoff_initial_s;
        double slept = 0.0;
        std::string last_error;
        for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
            const auto t0 = std::chrono::steady_clock::now();
            httplib::Result res = client.Post(path, headers, body.dump(), "application/json");
            const double latency =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            record_attempt({request_hash, res ? res->status : 0, latency});
            if (res && res->status == 200) {
                return parse_response(res->body, latency);
            }
            if (res && res->status != 429 && res->status < 500) {
                throw ProtocolError("LLM endpoint returned status " +
                                    std::to_string(res->status) + ": " + res->body);
            }
            last_error = res ? "status " + std::to_string(res->status)
                             : "transport error " + httplib::to_string(res.error());
            if (attempt + 1 < config_.max_attempts && slept + backoff <= config_.backoff_cap_total_s) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                slept += backoff;
                backoff *= 2.0;
            }
        }
        throw ProviderUnavailable("LLM request failed after " +
                                  std::to_string(config_.max_attempts) +
                                  " attempts: " + last_error);
    }

private:
    static LlmResponse parse_response(const std::string& body, double latency) {
        LlmResponse out;
        out.latency_s = latency;
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("malformed response body: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw ProtocolError("response has no choices");
        const auto& choice = j["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content"))
            throw ProtocolError("response choice has no message content");
        out.text = choice["message"]["content"].get<std::string>();
        if (j.contains("usage")) {
            out.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
            out.completion_tokens = j["usage"].value("completion_tokens", 0L);
        }
        return out;
    }

    void record_attempt(HttpAttempt attempt) {
        std::lock_guard<std::mutex> lock(mutex_);
        attempts_.push_back(attempt);
    }

    HttpProviderConfig config_;
    mutable std::mutex mutex_;
    std::vector<HttpAttempt> attempts_;
};

class MockProvider final : public Provider {
public:
    explicit MockProvider(std::map<std::string, std::vector<std::string>> script)
        : script_(std::move(script)) {}

    std::string name() const override { return "mock"; }

    LlmResponse complete(const LlmRequest& req) override {
        LlmResponse out;
        out.latency_s = 0.0;
        auto it = script_.find(req.tag);
        if (it == script_.end()) it = script_.find("");
        if (it == script_.end() || it->second.empty())
            throw ProviderUnavailable("mock script has no responses for tag '" + req.tag + "'");
        auto& cursor = cursors_[it->first];
        out.text = it->second[cursor % it->second.size()];
        ++cursor;
        return out;
    }

private:
    std::map<std::string, std::vector<std::string>> script_;
    std::map<std::string, std::size_t> cursors_;
};

} // namespace

std::unique_ptr<HttpProviderBase> make_http_provider(HttpProviderConfig config) {
    return std::make_unique<HttpProvider>(std::move(config));
}

std::unique_ptr<HttpProviderBase> make_http_provider_from_env() {
    HttpProviderConfig cfg;
    cfg.base_url = env_or("EVOCAF_LLM_BASE_URL", "");
    cfg.api_key = env_or("EVOCAF_LLM_API_KEY", "");
    cfg.model = env_or("EVOCAF_LLM_MODEL", "");
    return make_http_provider(std::move(cfg));
}

std::unique_ptr<Provider> make_mock_provider(
    std::map<std::string, std::vector<std::string>> script) {
    return std::make_unique<MockProvider>(std::move(script));
}

std::unique_ptr<Provider> make_provider(ProviderKind kind, const std::string& mock_script_path) {
    if (kind == ProviderKind::http) return make_http_provider_from_env();
    if (mock_script_path.empty())
        throw ConfigError("the mock provider requires a script file");
    return make_mock_provider_from_file(mock_script_path);
}

std::unique_ptr<Provider> make_mock_provider_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
    }
    std::map<std::string, std::vector<std::string>> script;
    if (j.is_array()) {
        script[""] = j.get<std::vector<std::string>>();
    } else if (j.is_object()) {
        for (const auto& [key, value] : j.items())
            script[key] = value.get<std::vector<std::string>>();
    } else {
        throw ConfigError("mock script must be a JSON array or object");
    }
    return make_mock_provider(std::move(script));
}

std::pair<std::string, std::string> extract_program(const std::string& response_text) {
    // Fenced blocks delimited by ``` lines; an info string after the opening
    // fence is ignored.
    std::vector<std::pair<std::size_t, std::size_t>> blocks; // [content_begin, content_end)
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = response_text.find("```", pos);
        if (open == std::string::npos) break;
        std::size_t content_begin = response_text.find('\n', open);
        if (content_begin == std::string::npos) break;
        ++content_begin;
        const std::size_t close = response_text.find("```", content_begin);
        if (close == std::string::npos) break;
        blocks.emplace_back(content_begin, close);
        pos = close + 3;
    }
    if (blocks.empty())
        throw ExtractionError("no fenced code block in completion");

    std::string source = response_text.substr(blocks.back().first,
                                              blocks.back().second - blocks.back().first);
    while (!source.empty() && (source.back() == '\n' || source.back() == '\r' ||
                               source.back() == ' '))
        source.pop_back();

    std::string description = response_text.substr(0, response_text.find("```"));
    while (!description.empty() &&
           std::isspace(static_cast<unsigned char>(description.back())))
        description.pop_back();
    std::size_t lead = 0;
    while (lead < description.size() &&
           std::isspace(static_cast<unsigned char>(description[lead])))
        ++lead;
    description.erase(0, lead);
    return {description, source};
}

} // namespace evocaf::llm
