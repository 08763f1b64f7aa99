#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace groom {

struct HttpRequest {
    std::string method;
    std::string url;
    std::map<std::string, std::string> headers;
    std::string body;
};

struct HttpResponse {
    /// 0 means the request never produced a response (connect/timeout failure).
    int status = 0;
    std::string body;
    std::string transport_error;
};

/// Minimal blocking HTTP client seam. Production code uses HttplibTransport;
/// tests substitute scripted transports.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse send(const HttpRequest& request) = 0;
};

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : timeout_(timeout) {}

    HttpResponse send(const HttpRequest& request) override;

private:
    std::chrono::milliseconds timeout_;
};

/// Scripted transport: replies via a handler and keeps a log of every request.
class RecordingTransport final : public HttpTransport {
public:
    using Handler = std::function<HttpResponse(const HttpRequest&)>;

    explicit RecordingTransport(Handler handler) : handler_(std::move(handler)) {}

    HttpResponse send(const HttpRequest& request) override;

    std::vector<HttpRequest> requests() const;
    std::size_t count() const;

private:
    Handler handler_;
    mutable std::mutex mutex_;
    std::vector<HttpRequest> log_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Exponential backoff: `attempts` tries, waiting initial_backoff * 2^k between them.
struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    Sleeper sleep;  // defaults to std::this_thread::sleep_for when empty
};

/// True for statuses worth another attempt: no response, 429, and 5xx.
bool is_retryable(int status);

/// Sends `request` until a non-retryable response arrives or the policy runs
/// out. Returns the last response; `attempts_used` reports the tries spent.
HttpResponse send_with_retry(HttpTransport& transport, const HttpRequest& request,
                             const RetryPolicy& policy, int* attempts_used = nullptr);

std::string url_encode(std::string_view text);

/// "Basic <base64(user:token)>".
std::string basic_auth_header(const std::string& user, const std::string& token);

}  // namespace groom
