#include "acr/embedding.hpp"

#include <cmath>
#include <chrono>
#include <thread>

#include <json.hpp>

#include "acr/corpus.hpp"
#include "acr/error.hpp"
#include "acr/http_client.hpp"
#include "acr/rng.hpp"

namespace acr {

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

void l2_normalize(EmbeddingVector& v) {
    const double n = l2_norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
}

EmbeddingVector embed_builtin(const std::string& text, std::size_t d, std::uint64_t seed) {
    if (d < 2) throw DataError("builtin embedder requires dimension >= 2");
    EmbeddingVector v(d, 0.0);
    for (const auto& token : tokenize(text)) {
        const std::uint64_t h = fnv1a64(std::string(token), seed);
        const std::size_t bucket = static_cast<std::size_t>(h % d);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[bucket] += sign;
    }
    bool all_zero = true;
    for (double x : v) {
        if (x != 0.0) {
            all_zero = false;
            break;
        }
    }
    if (all_zero) {
        v[0] = 1.0;
        return v;
    }
    l2_normalize(v);
    return v;
}

BuiltinEmbedder::BuiltinEmbedder(std::size_t d, std::uint64_t seed) : d_(d), seed_(seed) {
    if (d < 2) throw DataError("builtin embedder requires dimension >= 2");
}

std::vector<EmbeddingVector> BuiltinEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    // Each slot is computed independently; output is order-preserving and
    // identical for any thread count.
    #pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(texts.size()); ++i) {
        out[static_cast<std::size_t>(i)] =
            embed_builtin(texts[static_cast<std::size_t>(i)], d_, seed_);
    }
    return out;
}

std::string BuiltinEmbedder::fingerprint() const {
    return "builtin-fh:d=" + std::to_string(d_) + ":seed=" + std::to_string(seed_);
}

ExternalEmbedder::ExternalEmbedder(ExternalEmbedderConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw UsageError("external embedder: base_url not configured");
}

ExternalEmbedder::~ExternalEmbedder() = default;

std::vector<EmbeddingVector> ExternalEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += config_.max_batch) {
        const std::size_t end = std::min(begin + config_.max_batch, texts.size());
        std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                       texts.begin() + static_cast<std::ptrdiff_t>(end));
        auto vectors = embed_batch(batch);
        out.insert(out.end(), std::make_move_iterator(vectors.begin()),
                   std::make_move_iterator(vectors.end()));
    }
    if (out.empty()) return out;
    return out;
}

std::vector<EmbeddingVector> ExternalEmbedder::embed_batch(const std::vector<std::string>& texts) {
    nlohmann::json body;
    body["model"] = config_.model;
    body["input"] = texts;

    HttpRequestOptions opts;
    opts.base_url = config_.base_url;
    opts.path = config_.path;
    opts.auth_env = config_.auth_env;
    opts.max_attempts = config_.max_attempts;
    opts.backoff_initial_ms = config_.backoff_initial_ms;
    opts.timeout_sec = config_.timeout_sec;

    const HttpResult res = http_post_json(opts, body.dump(), retries_);

    nlohmann::json payload = nlohmann::json::parse(res.body, nullptr, false);
    if (payload.is_discarded() || !payload.contains("data") || !payload["data"].is_array())
        throw ExternalServiceError("embedding response is not {\"data\": [...]}: " +
                                   res.body.substr(0, 200));
    const auto& data = payload["data"];
    if (data.size() != texts.size())
        throw ExternalServiceError("embedding response count " + std::to_string(data.size()) +
                                   " != input count " + std::to_string(texts.size()));

    std::vector<EmbeddingVector> vectors;
    vectors.reserve(data.size());
    for (const auto& item : data) {
        if (!item.contains("embedding") || !item["embedding"].is_array())
            throw ExternalServiceError("embedding item missing 'embedding' array");
        EmbeddingVector v = item["embedding"].get<EmbeddingVector>();
        if (dimension_ == 0) dimension_ = v.size();
        if (v.size() != dimension_)
            throw ExternalServiceError("dimension mismatch within batch: got " +
                                       std::to_string(v.size()) + ", expected " +
                                       std::to_string(dimension_));
        l2_normalize(v);
        vectors.push_back(std::move(v));
    }
    return vectors;
}

std::string ExternalEmbedder::fingerprint() const {
    return "external:" + config_.model + ":d=" + std::to_string(dimension_);
}

}  // namespace acr
