#pragma once

#include <string>

namespace cfolio {

struct FetchOptions {
    int attempts = 3;
    int initial_backoff_ms = 250;
    int timeout_sec = 10;
};

// GET the URL and return the response body. Retries with exponential backoff
// between attempts; throws IoError once they are exhausted.
std::string fetch_csv(const std::string& url, const FetchOptions& opts = {});

}  // namespace cfolio
