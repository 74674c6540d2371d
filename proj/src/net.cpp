#include "rada/net.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "rada/error.hpp"

namespace rada::net {

Endpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + scheme);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    if (path_start == std::string::npos) {
        ep.scheme_host_port = url;
        ep.path = "/";
    } else {
        ep.scheme_host_port = url.substr(0, path_start);
        ep.path = url.substr(path_start);
    }
    if (ep.scheme_host_port.size() <= scheme_end + 3) throw ConfigError("endpoint URL has no host: " + url);
    return ep;
}

namespace {

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::string base) : base_(std::move(base)) {}

    HttpResult post(const std::string& path, const std::string& body, const Headers& headers,
                    std::chrono::milliseconds timeout) override {
        // One client per call: httplib::Client is not safe for concurrent use.
        httplib::Client client(base_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers h(headers.begin(), headers.end());
        auto res = client.Post(path, h, body, "application/json");
        HttpResult out;
        if (!res) {
            out.transport_error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }

private:
    std::string base_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& scheme_host_port) {
    return std::make_unique<HttplibTransport>(scheme_host_port);
}

FailureClass classify(const HttpResult& r) {
    if (r.status >= 200 && r.status < 300) return FailureClass::none;
    if (r.status == 0) return FailureClass::retryable;
    if (r.status == 401 || r.status == 403) return FailureClass::auth;
    if (r.status == 408 || r.status == 425 || r.status == 429 || r.status >= 500) return FailureClass::retryable;
    return FailureClass::fatal;
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
    if (retry < 1) return std::chrono::milliseconds(0);
    const int shift = std::min(retry - 1, 30);
    const auto d = base_delay.count() * (std::int64_t{1} << shift);
    return std::chrono::milliseconds(std::min<std::int64_t>(d, max_delay.count()));
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RetryOutcome post_with_retries(HttpTransport& transport, const std::string& path, const std::string& body,
                               const Headers& headers, std::chrono::milliseconds timeout, const RetryPolicy& policy,
                               const Sleeper& sleep) {
    RetryOutcome out;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 0) sleep(policy.delay_for(attempt));
        out.last = transport.post(path, body, headers, timeout);
        out.attempts = attempt + 1;
        out.failure = classify(out.last);
        if (out.failure != FailureClass::retryable || attempt >= policy.max_retries) return out;
    }
}

TokenBucket::TokenBucket(double rate, double burst, NowFn now, Sleeper sleep)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)), now_(std::move(now)),
      sleep_(std::move(sleep)), last_(now_()) {
    if (!(rate_ > 0.0)) throw ConfigError("token bucket rate must be positive");
}

void TokenBucket::refill_locked() {
    const auto t = now_();
    const double elapsed = std::chrono::duration<double>(t - last_).count();
    if (elapsed > 0.0) {
        tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
        last_ = t;
    }
}

bool TokenBucket::try_acquire() {
    std::lock_guard lock(mu_);
    refill_locked();
    if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return true;
    }
    return false;
}

void TokenBucket::acquire() {
    for (;;) {
        std::chrono::milliseconds wait{0};
        {
            std::lock_guard lock(mu_);
            refill_locked();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            const double missing = 1.0 - tokens_;
            wait = std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(missing / rate_ * 1000.0)));
            if (wait.count() < 1) wait = std::chrono::milliseconds(1);
        }
        sleep_(wait);
    }
}

InFlightLimiter::InFlightLimiter(std::ptrdiff_t limit)
    : sem_(std::clamp<std::ptrdiff_t>(limit, 1, 4096)) {}

}  // namespace rada::net
