#include "acr/http_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "acr/error.hpp"

namespace acr {

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpResult http_post_json(const HttpRequestOptions& opts, const std::string& body,
                          int& retry_counter) {
    httplib::Client client(opts.base_url);
    client.set_connection_timeout(opts.timeout_sec);
    client.set_read_timeout(opts.timeout_sec);

    httplib::Headers headers;
    if (!opts.auth_env.empty()) {
        if (const char* token = std::getenv(opts.auth_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    int delay_ms = opts.backoff_initial_ms;
    for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
        if (attempt > 1) {
            ++retry_counter;
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms *= 2;
        }
        auto res = client.Post(opts.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) return {res->status, res->body};
        if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            continue;
        }
        throw ExternalServiceError("HTTP " + std::to_string(res->status) + " from " +
                                   opts.base_url + opts.path + ": " + res->body.substr(0, 200));
    }
    throw ExternalServiceError("request to " + opts.base_url + opts.path + " failed after " +
                               std::to_string(opts.max_attempts) + " attempts; last: " +
                               last_error);
}

}  // namespace acr
