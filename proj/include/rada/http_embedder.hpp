#pragma once

#include <memory>
#include <string>

#include "rada/net.hpp"
#include "rada/retrieval.hpp"

namespace rada {

struct HttpEmbedderConfig {
    std::string endpoint;  // full URL
    std::string api_key;   // sent as a bearer token when non-empty
    std::string model_name = "remote";
    std::chrono::milliseconds timeout{30000};
    net::RetryPolicy retry;
    std::ptrdiff_t in_flight_limit = 4;
};

// Remote embedder speaking {"texts": [...]} -> {"vectors": [[...], ...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEmbedderConfig cfg);
    HttpEmbeddingProvider(HttpEmbedderConfig cfg, std::unique_ptr<net::HttpTransport> transport,
                          net::Sleeper sleep);

    std::string fingerprint() const override;
    std::vector<Vector> embed(std::span<const std::string> texts) override;

private:
    HttpEmbedderConfig cfg_;
    net::Endpoint endpoint_;
    std::unique_ptr<net::HttpTransport> transport_;
    net::Sleeper sleep_;
    net::InFlightLimiter limiter_;
};

}  // namespace rada
