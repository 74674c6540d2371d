#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rada/error.hpp"
#include "rada/net.hpp"
#include "rada/promptgen.hpp"

namespace rada {

struct GenerationParams {
    double temperature = 0.7;
    int max_new_tokens = 512;
    std::vector<std::string> stop_sequences;
    std::chrono::milliseconds request_timeout{60000};
    int max_retries = 3;

    // Throws ConfigError: temperature >= 0, max_new_tokens >= 1, 0 <= max_retries <= 5.
    void validate() const;
};

struct CompletionRecord {
    std::string prompt_digest;
    std::string raw_text;
    std::string backend_name;
    std::chrono::milliseconds latency{0};
    int attempt_count = 0;
};

enum class LlmErrorKind { auth, timeout_exhausted, malformed_response, bad_request };

class LlmError : public Error {
public:
    LlmError(LlmErrorKind kind, int attempts, const std::string& message)
        : Error(message), kind_(kind), attempts_(attempts) {}
    LlmErrorKind kind() const noexcept { return kind_; }
    int attempts() const noexcept { return attempts_; }

private:
    LlmErrorKind kind_;
    int attempts_;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    // Must be safe to call from several threads at once.
    virtual CompletionRecord complete(const RenderedPrompt& prompt, const GenerationParams& params) = 0;
    virtual std::string name() const = 0;
    // Non-secret description recorded in run manifests.
    virtual std::string identity() const { return name(); }
};

// Offline stand-in for a generator. Reads the target block at the end of an
// augmentation prompt and answers with a span of it:
//   extractive_qa: "Question: <first 8 tokens of context>?\nAnswer: <span>"
//   mmlu_v1:       "Answer Options: A. .. D. ..\nAnswer: <one option>"
//   mmlu_v2:       "Question: <first 8 option tokens>?\nAnswer: <one option>"
// The span and option choice come from a hash of the prompt and the seed.
std::string mock_generate_from_context(const RenderedPrompt& prompt, std::uint64_t seed = 0);

class MockBackend final : public LlmBackend {
public:
    explicit MockBackend(std::uint64_t seed = 0) : seed_(seed) {}

    // Scripted replies take precedence over the context-derived reply.
    void script(const std::string& prompt_digest, std::string reply);

    CompletionRecord complete(const RenderedPrompt& prompt, const GenerationParams& params) override;
    std::string name() const override { return "mock"; }
    std::string identity() const override;

private:
    std::uint64_t seed_;
    std::mutex mu_;
    std::unordered_map<std::string, std::string> scripted_;
};

struct ChatClientConfig {
    std::string endpoint;  // full chat-completions URL
    std::string api_key;
    std::string model;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::milliseconds max_backoff{8000};
    std::ptrdiff_t in_flight_limit = 4;
    double requests_per_second = 0.0;  // 0 disables the limiter
    double burst = 4.0;

    // RADA_LLM_ENDPOINT, RADA_LLM_API_KEY, RADA_LLM_MODEL. Throws ConfigError
    // when the endpoint or model is unset.
    static ChatClientConfig from_env();
};

// Chat-completions client: one user message holding the prompt text.
class ChatCompletionClient final : public LlmBackend {
public:
    explicit ChatCompletionClient(ChatClientConfig cfg);
    ChatCompletionClient(ChatClientConfig cfg, std::unique_ptr<net::HttpTransport> transport, net::Sleeper sleep);

    CompletionRecord complete(const RenderedPrompt& prompt, const GenerationParams& params) override;
    std::string name() const override { return "http"; }
    std::string identity() const override;

    // Request body sent for a prompt (exposed for logging and tests).
    std::string request_body(const RenderedPrompt& prompt, const GenerationParams& params) const;

private:
    ChatClientConfig cfg_;
    net::Endpoint endpoint_;
    std::unique_ptr<net::HttpTransport> transport_;
    net::Sleeper sleep_;
    net::InFlightLimiter limiter_;
    std::unique_ptr<net::TokenBucket> bucket_;
};

// Extracts choices[0].message.content. Throws LlmError(malformed_response).
std::string parse_chat_response(const std::string& body);

// Appends one JSON line per completion to a log file, then forwards.
class AuditingBackend final : public LlmBackend {
public:
    AuditingBackend(LlmBackend& inner, const std::filesystem::path& log_path);

    CompletionRecord complete(const RenderedPrompt& prompt, const GenerationParams& params) override;
    std::string name() const override { return inner_->name(); }
    std::string identity() const override { return inner_->identity(); }

private:
    LlmBackend* inner_;
    std::mutex mu_;
    std::ofstream log_;
};

}  // namespace rada
