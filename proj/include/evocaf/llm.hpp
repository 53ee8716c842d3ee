#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace evocaf::llm {

struct LlmRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 1.0; // [0, 2]
    int max_tokens = 1024;
    std::string model_name;
    std::string tag; // prompt kind ("init", "crossover", "mutation"); drives the mock script
};

struct LlmResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double latency_s = 0.0;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual LlmResponse complete(const LlmRequest& req) = 0;
    virtual std::string name() const = 0;
};

// Chat-completion HTTP client. Base URL, credential and model come from
// EVOCAF_LLM_BASE_URL, EVOCAF_LLM_API_KEY and EVOCAF_LLM_MODEL unless given
// explicitly. Retries with exponential backoff on 429/5xx, max 5 attempts,
// total backoff capped at 60 s.
struct HttpProviderConfig {
    std::string base_url; // e.g. http://127.0.0.1:8080/v1
    std::string api_key;
    std::string model;
    int max_attempts = 5;
    double backoff_initial_s = 1.0;
    double backoff_cap_total_s = 60.0;
};

// One line per HTTP attempt: request hash, status, latency. Every interaction
// is recorded, including retried failures.
struct HttpAttempt {
    std::uint64_t request_hash = 0;
    int status = 0; // 0 for transport errors
    double latency_s = 0.0;
};

class HttpProviderBase : public Provider {
public:
    virtual std::vector<HttpAttempt> attempts() const = 0;
};

std::unique_ptr<HttpProviderBase> make_http_provider(HttpProviderConfig config);
std::unique_ptr<HttpProviderBase> make_http_provider_from_env();

// Deterministic scripted provider: responses are replayed per prompt-kind tag.
std::unique_ptr<Provider> make_mock_provider(
    std::map<std::string, std::vector<std::string>> script);

// Loads a mock script from JSON: either {"init": [...], "crossover": [...],
// "mutation": [...]} or a flat array applied to every tag in round-robin.
std::unique_ptr<Provider> make_mock_provider_from_file(const std::string& path);

enum class ProviderKind { http, mock };

// CLI-facing factory: http reads its endpoint and credential from the
// environment; mock requires a script file.
std::unique_ptr<Provider> make_provider(ProviderKind kind,
                                        const std::string& mock_script_path = "");

// Log entry for the audit trail kept by callers.
struct InteractionLog {
    std::string tag;
    std::string prompt;
    std::string response;
    std::string status; // ok | error:<what>
    double latency_s = 0.0;
};

// Splits a completion into (description, DSL source): the description is the
// text before the first fenced block, the source is the last fenced block.
std::pair<std::string, std::string> extract_program(const std::string& response_text);

} // namespace evocaf::llm
