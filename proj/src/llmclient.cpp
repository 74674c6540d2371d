#include "rada/llmclient.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "rada/rng.hpp"
#include "rada/text.hpp"

namespace rada {

void GenerationParams::validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (max_retries < 0 || max_retries > 5) throw ConfigError("max_retries must be in [0, 5]");
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string join_first(const std::vector<std::string_view>& words, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < std::min(n, words.size()); ++i) {
        if (i > 0) out += ' ';
        out.append(words[i]);
    }
    return out;
}

std::string mock_extractive(const std::string& context, std::uint64_t h) {
    const auto words = text::split_whitespace(context);
    if (words.empty()) throw LlmError(LlmErrorKind::bad_request, 1, "mock: empty target context");
    const std::size_t start = h % words.size();
    const std::size_t max_len = std::min<std::size_t>(5, words.size() - start);
    const std::size_t len = 1 + (h >> 20) % max_len;
    const auto begin = static_cast<std::size_t>(words[start].data() - context.data());
    const auto& last = words[start + len - 1];
    const auto end = static_cast<std::size_t>(last.data() - context.data()) + last.size();
    return "Question: " + join_first(words, 8) + "?\nAnswer: " + context.substr(begin, end - begin);
}

std::string mock_options(const std::string& question, std::uint64_t h) {
    std::vector<std::string> candidates;
    std::set<std::string> seen;
    for (auto& t : text::word_tokens(question)) {
        if (seen.insert(t).second) candidates.push_back(std::move(t));
    }
    std::array<std::string, 4> options;
    std::size_t filled = 0;
    Rng rng(h);
    while (filled < 4 && !candidates.empty()) {
        const auto pick = static_cast<std::size_t>(rng.below(candidates.size()));
        options[filled++] = candidates[pick];
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    static constexpr const char* kFallback[] = {"none of the above", "all of the above", "not enough information",
                                                "cannot be determined"};
    for (std::size_t f = 0; filled < 4; ++f) options[filled++] = kFallback[f];
    const auto& answer = options[(h >> 8) % 4];
    return "Answer Options: " + format_options(options) + "\nAnswer: " + answer;
}

std::string mock_question_for_options(const std::array<std::string, 4>& options, std::uint64_t h) {
    std::string joined;
    for (const auto& o : options) joined += o + " ";
    const auto words = text::split_whitespace(joined);
    return "Question: " + join_first(words, 8) + "?\nAnswer: " + options[(h >> 8) % 4];
}

}  // namespace

std::string mock_generate_from_context(const RenderedPrompt& prompt, std::uint64_t seed) {
    const std::uint64_t h = Rng::splitmix(text::fnv1a64(prompt.text) ^ Rng::splitmix(seed));
    const auto missing = [&] {
        return LlmError(LlmErrorKind::bad_request, 1, "mock: prompt without a target block");
    };
    switch (prompt.kind) {
        case TemplateKind::extractive_qa: {
            const auto ctx = final_labeled_block(prompt.text, "Context: ");
            if (!ctx || text::trim(*ctx).empty()) throw missing();
            return mock_extractive(*ctx, h);
        }
        case TemplateKind::mmlu_v1: {
            const auto q = final_labeled_block(prompt.text, "Question: ");
            if (!q || text::trim(*q).empty()) throw missing();
            return mock_options(*q, h);
        }
        case TemplateKind::mmlu_v2: {
            const auto block = final_labeled_block(prompt.text, "Answer Options: ");
            if (!block) throw missing();
            try {
                return mock_question_for_options(split_options(*block), h);
            } catch (const ParseError&) {
                throw missing();
            }
        }
        default:
            throw LlmError(LlmErrorKind::bad_request, 1, "mock: not an augmentation prompt");
    }
}

void MockBackend::script(const std::string& prompt_digest, std::string reply) {
    std::lock_guard lock(mu_);
    scripted_[prompt_digest] = std::move(reply);
}

CompletionRecord MockBackend::complete(const RenderedPrompt& prompt, const GenerationParams& params) {
    params.validate();
    CompletionRecord rec;
    rec.prompt_digest = prompt.digest;
    rec.backend_name = name();
    rec.attempt_count = 1;
    {
        std::lock_guard lock(mu_);
        if (const auto it = scripted_.find(prompt.digest); it != scripted_.end()) {
            rec.raw_text = it->second;
            return rec;
        }
    }
    rec.raw_text = mock_generate_from_context(prompt, seed_);
    return rec;
}

std::string MockBackend::identity() const { return "mock(seed=" + std::to_string(seed_) + ")"; }

// ---------------------------------------------------------------------------
// HTTP chat completions

ChatClientConfig ChatClientConfig::from_env() {
    const auto get = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v == nullptr ? std::string() : std::string(v);
    };
    ChatClientConfig cfg;
    cfg.endpoint = get("RADA_LLM_ENDPOINT");
    cfg.api_key = get("RADA_LLM_API_KEY");
    cfg.model = get("RADA_LLM_MODEL");
    if (cfg.endpoint.empty()) throw ConfigError("RADA_LLM_ENDPOINT is not set");
    if (cfg.model.empty()) throw ConfigError("RADA_LLM_MODEL is not set");
    return cfg;
}

namespace {

class RateLimitedTransport final : public net::HttpTransport {
public:
    RateLimitedTransport(net::HttpTransport& inner, net::TokenBucket* bucket) : inner_(inner), bucket_(bucket) {}
    net::HttpResult post(const std::string& path, const std::string& body, const net::Headers& headers,
                         std::chrono::milliseconds timeout) override {
        if (bucket_ != nullptr) bucket_->acquire();
        return inner_.post(path, body, headers, timeout);
    }

private:
    net::HttpTransport& inner_;
    net::TokenBucket* bucket_;
};

}  // namespace

ChatCompletionClient::ChatCompletionClient(ChatClientConfig cfg)
    : ChatCompletionClient(cfg, net::make_http_transport(net::parse_endpoint(cfg.endpoint).scheme_host_port),
                           net::real_sleeper()) {}

ChatCompletionClient::ChatCompletionClient(ChatClientConfig cfg, std::unique_ptr<net::HttpTransport> transport,
                                           net::Sleeper sleep)
    : cfg_(std::move(cfg)), endpoint_(net::parse_endpoint(cfg_.endpoint)), transport_(std::move(transport)),
      sleep_(std::move(sleep)), limiter_(cfg_.in_flight_limit) {
    if (cfg_.requests_per_second > 0.0) {
        bucket_ = std::make_unique<net::TokenBucket>(cfg_.requests_per_second, cfg_.burst,
                                                     [] { return net::TokenBucket::Clock::now(); }, sleep_);
    }
}

std::string ChatCompletionClient::identity() const { return "http(model=" + cfg_.model + ", endpoint=" + cfg_.endpoint + ")"; }

std::string ChatCompletionClient::request_body(const RenderedPrompt& prompt, const GenerationParams& params) const {
    nlohmann::ordered_json body;
    body["model"] = cfg_.model;
    body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt.text}}});
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_new_tokens;
    if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;
    return body.dump();
}

std::string parse_chat_response(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw LlmError(LlmErrorKind::malformed_response, 1, "content is not a string");
        return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw LlmError(LlmErrorKind::malformed_response, 1, std::string("malformed chat response: ") + e.what());
    }
}

CompletionRecord ChatCompletionClient::complete(const RenderedPrompt& prompt, const GenerationParams& params) {
    params.validate();
    net::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    const net::RetryPolicy policy{params.max_retries, cfg_.base_backoff, cfg_.max_backoff};
    const auto body = request_body(prompt, params);

    const auto t0 = std::chrono::steady_clock::now();
    net::RetryOutcome outcome;
    {
        auto permit = limiter_.acquire();
        RateLimitedTransport transport(*transport_, bucket_.get());
        outcome = net::post_with_retries(transport, endpoint_.path, body, headers, params.request_timeout, policy,
                                         sleep_);
    }
    const auto status = std::to_string(outcome.last.status);
    switch (outcome.failure) {
        case net::FailureClass::none: break;
        case net::FailureClass::auth:
            throw LlmError(LlmErrorKind::auth, outcome.attempts, "authentication failed (HTTP " + status + ")");
        case net::FailureClass::retryable:
            throw LlmError(LlmErrorKind::timeout_exhausted, outcome.attempts,
                           "gave up after " + std::to_string(outcome.attempts) + " attempts (last: HTTP " + status +
                               (outcome.last.transport_error.empty() ? "" : ", " + outcome.last.transport_error) + ")");
        case net::FailureClass::fatal:
            throw LlmError(LlmErrorKind::bad_request, outcome.attempts, "request rejected (HTTP " + status + ")");
    }
    CompletionRecord rec;
    try {
        rec.raw_text = parse_chat_response(outcome.last.body);
    } catch (const LlmError& e) {
        throw LlmError(LlmErrorKind::malformed_response, outcome.attempts, e.what());
    }
    rec.prompt_digest = prompt.digest;
    rec.backend_name = name();
    rec.attempt_count = outcome.attempts;
    rec.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    return rec;
}

// ---------------------------------------------------------------------------

AuditingBackend::AuditingBackend(LlmBackend& inner, const std::filesystem::path& log_path)
    : inner_(&inner), log_(log_path, std::ios::binary | std::ios::app) {
    if (!log_) throw Error("cannot open completion log " + log_path.string());
}

CompletionRecord AuditingBackend::complete(const RenderedPrompt& prompt, const GenerationParams& params) {
    auto rec = inner_->complete(prompt, params);
    nlohmann::ordered_json j;
    j["prompt_digest"] = rec.prompt_digest;
    j["backend"] = rec.backend_name;
    j["attempt_count"] = rec.attempt_count;
    j["latency_ms"] = rec.latency.count();
    j["raw_text"] = rec.raw_text;
    std::lock_guard lock(mu_);
    log_ << j.dump() << '\n';
    log_.flush();
    return rec;
}

}  // namespace rada
