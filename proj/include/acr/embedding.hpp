#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace acr {

/// L2-normalized dense vector. Norm is 1 within 1e-6 after normalization.
using EmbeddingVector = std::vector<double>;

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(const EmbeddingVector& v);
void l2_normalize(EmbeddingVector& v);

/// Feature-hashed bag-of-tokens embedding: each token is hashed with the
/// seeded hash to a bucket in [0, d) and a sign in {-1, +1}; term frequencies
/// accumulate with that sign and the vector is L2-normalized. An all-zero
/// accumulation (e.g. empty text) maps to the unit vector on axis 0.
EmbeddingVector embed_builtin(const std::string& text, std::size_t d, std::uint64_t seed);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dimension() const = 0;
    /// Name + parameters; recorded in indexes and checked at query time.
    virtual std::string fingerprint() const = 0;

    EmbeddingVector embed_one(const std::string& text) {
        return embed(std::vector<std::string>{text}).front();
    }
};

class BuiltinEmbedder final : public Embedder {
public:
    BuiltinEmbedder(std::size_t d, std::uint64_t seed);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return d_; }
    std::string fingerprint() const override;

private:
    std::size_t d_;
    std::uint64_t seed_;
};

struct ExternalEmbedderConfig {
    std::string base_url;           // e.g. http://127.0.0.1:8089
    std::string path = "/v1/embeddings";
    std::string model;
    std::string auth_env;           // name of the env var holding the bearer token
    std::size_t max_batch = 64;
    int max_attempts = 3;
    int backoff_initial_ms = 100;   // doubles per retry
    int timeout_sec = 30;
};

/// HTTP embedding client. POSTs {"model", "input": [...]} and expects
/// {"data": [{"embedding": [...]}, ...]} in input order. Vectors are
/// re-normalized locally; dimension is taken from the first response.
class ExternalEmbedder final : public Embedder {
public:
    explicit ExternalEmbedder(ExternalEmbedderConfig config);
    ~ExternalEmbedder() override;

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dimension_; }
    std::string fingerprint() const override;

    /// Retries performed over the client's lifetime (observable in logs/tests).
    int retries() const { return retries_; }

private:
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

    ExternalEmbedderConfig config_;
    std::size_t dimension_ = 0;  // set from the first response
    int retries_ = 0;
};

}  // namespace acr
