#include "cfolio/fetch.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "cfolio/errors.hpp"

namespace cfolio {

namespace {

struct UrlParts {
    std::string base;  // scheme://host[:port]
    std::string path;  // /path?query
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw DomainError("fetch: URL must include a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    UrlParts parts;
    if (path_start == std::string::npos) {
        parts.base = url;
        parts.path = "/";
    } else {
        parts.base = url.substr(0, path_start);
        parts.path = url.substr(path_start);
    }
    return parts;
}

}  // namespace

std::string fetch_csv(const std::string& url, const FetchOptions& opts) {
    const UrlParts parts = split_url(url);
    httplib::Client client(parts.base);
    client.set_connection_timeout(opts.timeout_sec, 0);
    client.set_read_timeout(opts.timeout_sec, 0);
    client.set_follow_location(true);

    int backoff = opts.initial_backoff_ms;
    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt < opts.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto res = client.Get(parts.path);
        if (res && res->status == 200) return res->body;
        if (res) {
            last_error = "HTTP status " + std::to_string(res->status);
        } else {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
        }
    }
    throw IoError("fetch: " + url + " failed after " +
                  std::to_string(opts.attempts) + " attempts: " + last_error);
}

}  // namespace cfolio
