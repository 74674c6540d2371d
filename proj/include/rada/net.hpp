#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

namespace rada::net {

using Headers = std::multimap<std::string, std::string>;

struct HttpResult {
    int status = 0;  // 0 when no response arrived (connect failure, timeout)
    std::string body;
    std::string transport_error;
};

// One blocking POST. Implementations must be safe to call concurrently.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& path, const std::string& body, const Headers& headers,
                            std::chrono::milliseconds timeout) = 0;
};

struct Endpoint {
    std::string scheme_host_port;  // "https://api.example.com:443"
    std::string path;              // "/v1/chat/completions"
};

// Splits "scheme://host[:port]/path". Throws ConfigError on anything else.
Endpoint parse_endpoint(const std::string& url);

// cpp-httplib backed transport for one base URL.
std::unique_ptr<HttpTransport> make_http_transport(const std::string& scheme_host_port);

enum class FailureClass { none, retryable, auth, fatal };

// 2xx none; 401/403 auth; 408, 425, 429, 5xx and transport failures retryable;
// everything else fatal.
FailureClass classify(const HttpResult& r);

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{8000};

    // Delay before retry number `retry` (1-based): base * 2^(retry-1), capped.
    std::chrono::milliseconds delay_for(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

struct RetryOutcome {
    HttpResult last;
    int attempts = 0;
    FailureClass failure = FailureClass::none;
};

// Posts until success, a non-retryable failure, or the retry budget runs out.
RetryOutcome post_with_retries(HttpTransport& transport, const std::string& path, const std::string& body,
                               const Headers& headers, std::chrono::milliseconds timeout, const RetryPolicy& policy,
                               const Sleeper& sleep);

// Token bucket: `rate` tokens per second, at most `burst` stored.
class TokenBucket {
public:
    using Clock = std::chrono::steady_clock;
    using NowFn = std::function<Clock::time_point()>;

    TokenBucket(double rate, double burst, NowFn now = [] { return Clock::now(); }, Sleeper sleep = real_sleeper());

    // Blocks until one token is available, then takes it.
    void acquire();
    // Takes a token if one is available now.
    bool try_acquire();

private:
    void refill_locked();

    double rate_;
    double burst_;
    double tokens_;
    NowFn now_;
    Sleeper sleep_;
    Clock::time_point last_;
    std::mutex mu_;
};

// Caps concurrent in-flight requests.
class InFlightLimiter {
public:
    explicit InFlightLimiter(std::ptrdiff_t limit);

    class Permit {
    public:
        explicit Permit(InFlightLimiter& l) : limiter_(&l) { limiter_->sem_.acquire(); }
        ~Permit() { limiter_->sem_.release(); }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;

    private:
        InFlightLimiter* limiter_;
    };

    Permit acquire() { return Permit(*this); }

private:
    std::counting_semaphore<4096> sem_;
};

}  // namespace rada::net
