#pragma once

#include <string>

namespace acr {

struct HttpRequestOptions {
    std::string base_url;
    std::string path;
    std::string auth_env;  // env var holding the bearer token; empty = no auth
    int max_attempts = 3;
    int backoff_initial_ms = 100;
    int timeout_sec = 30;
};

struct HttpResult {
    int status = 0;
    std::string body;
};

/// POSTs a JSON body, retrying transport failures and 429/5xx with exponential
/// backoff. `retry_counter` is incremented once per retry. Throws
/// ExternalServiceError after max_attempts or on a non-retryable non-2xx
/// status (message carries a body excerpt).
HttpResult http_post_json(const HttpRequestOptions& opts, const std::string& body,
                          int& retry_counter);

}  // namespace acr
