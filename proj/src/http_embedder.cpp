#include "rada/http_embedder.hpp"

#include <json.hpp>

namespace rada {

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbedderConfig cfg)
    : HttpEmbeddingProvider(cfg, net::make_http_transport(net::parse_endpoint(cfg.endpoint).scheme_host_port),
                            net::real_sleeper()) {}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbedderConfig cfg, std::unique_ptr<net::HttpTransport> transport,
                                             net::Sleeper sleep)
    : cfg_(std::move(cfg)), endpoint_(net::parse_endpoint(cfg_.endpoint)), transport_(std::move(transport)),
      sleep_(std::move(sleep)), limiter_(cfg_.in_flight_limit) {}

std::string HttpEmbeddingProvider::fingerprint() const { return "http/" + cfg_.model_name + "@" + cfg_.endpoint; }

std::vector<Vector> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
    if (texts.empty()) return {};
    nlohmann::json body;
    body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    net::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    net::RetryOutcome outcome;
    {
        auto permit = limiter_.acquire();
        outcome = net::post_with_retries(*transport_, endpoint_.path, body.dump(), headers, cfg_.timeout, cfg_.retry,
                                         sleep_);
    }
    if (outcome.failure == net::FailureClass::auth) throw Error("embedding provider rejected credentials");
    if (outcome.failure != net::FailureClass::none) {
        throw Error("embedding provider failed after " + std::to_string(outcome.attempts) +
                    " attempt(s): status " + std::to_string(outcome.last.status) + " " +
                    outcome.last.transport_error);
    }
    std::vector<Vector> out;
    try {
        const auto j = nlohmann::json::parse(outcome.last.body);
        for (const auto& row : j.at("vectors")) out.push_back(row.get<Vector>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed embedding response: ") + e.what());
    }
    if (out.size() != texts.size()) throw Error("embedding provider returned the wrong number of vectors");
    return out;
}

}  // namespace rada
