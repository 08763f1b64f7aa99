#include "groom/http.hpp"

#include "groom/error.hpp"

#include <httplib.h>

#include <cstdio>
#include <thread>

namespace groom {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // path plus query, at least "/"
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "URL lacks a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttplibTransport::send(const HttpRequest& request) {
    auto parts = split_url(request.url);
    httplib::Client client(parts.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [name, value] : request.headers) {
        if (httplib::detail::compare_case_ignore(name, "Content-Type")) {
            content_type = value;
        } else {
            headers.emplace(name, value);
        }
    }

    httplib::Result result{nullptr, httplib::Error::Unknown};
    if (request.method == "GET") {
        result = client.Get(parts.path, headers);
    } else if (request.method == "POST") {
        result = client.Post(parts.path, headers, request.body, content_type);
    } else if (request.method == "PUT") {
        result = client.Put(parts.path, headers, request.body, content_type);
    } else if (request.method == "DELETE") {
        result = client.Delete(parts.path, headers, request.body, content_type);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unsupported HTTP method " + request.method);
    }

    HttpResponse response;
    if (!result) {
        response.transport_error = httplib::to_string(result.error());
        return response;
    }
    response.status = result->status;
    response.body = result->body;
    return response;
}

HttpResponse RecordingTransport::send(const HttpRequest& request) {
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
    }
    return handler_(request);
}

std::vector<HttpRequest> RecordingTransport::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t RecordingTransport::count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

bool is_retryable(int status) {
    return status == 0 || status == 429 || status >= 500;
}

HttpResponse send_with_retry(HttpTransport& transport, const HttpRequest& request,
                             const RetryPolicy& policy, int* attempts_used) {
    auto backoff = policy.initial_backoff;
    HttpResponse response;
    int attempt = 0;
    while (true) {
        ++attempt;
        response = transport.send(request);
        if (!is_retryable(response.status) || attempt >= policy.attempts) {
            break;
        }
        if (policy.sleep) {
            policy.sleep(backoff);
        } else {
            std::this_thread::sleep_for(backoff);
        }
        backoff *= 2;
    }
    if (attempts_used) {
        *attempts_used = attempt;
    }
    return response;
}

std::string url_encode(std::string_view text) {
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

std::string basic_auth_header(const std::string& user, const std::string& token) {
    return httplib::make_basic_authentication_header(user, token).second;
}

}  // namespace groom
