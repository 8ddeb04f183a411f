#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace acr {

inline constexpr const char* kToolVersion = "acr 0.1.0";

/// Flat TOML subset: [section] headers, key = value with strings, integers,
/// floats and booleans. ${VAR} inside strings is expanded from the
/// environment (secrets interpolation); unset variables expand empty.
class TomlTable {
public:
    static TomlTable parse(const std::string& text, const std::string& origin = "<config>");
    static TomlTable load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

private:
    // (section, key) -> raw value; section "" is the top level
    std::map<std::pair<std::string, std::string>, std::string> values_;
};

struct EmbedderSpec {
    std::string kind = "builtin";  // builtin | external
    std::size_t dimension = 256;
    std::uint64_t seed = 42;
    // external
    std::string base_url;
    std::string path = "/v1/embeddings";
    std::string model;
    std::string auth_env;
    std::size_t max_batch = 64;
    int max_attempts = 3;
};

struct ReaderSpec {
    std::string kind = "mock";  // mock | external
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string auth_env;
    double temperature = 0.0;
    double top_p = 0.95;
    int max_attempts = 3;
};

/// Run configuration. Defaults are the reference benchmark configuration.
struct RunConfig {
    std::size_t chunk_size = 1000;
    std::size_t overlap = 100;
    std::size_t top_k_chunks = 1000;
    std::size_t alpha = 50;
    std::size_t beta = 10;
    std::size_t max_reader_calls = 3;
    std::size_t context_budget = 128000;
    std::uint64_t seed = 42;
    int jobs = 0;  // 0 = all logical cores
    EmbedderSpec embedder;
    ReaderSpec reader;

    static RunConfig from_toml(const TomlTable& toml);
    static RunConfig load(const std::string& path);

    /// Canonical serialization; the config hash is the hash of this string.
    std::string canonical() const;
    std::string hash() const;
};

/// Sidecar metadata written next to every artifact file (<path>.meta.json).
struct ArtifactMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version;
};

void write_artifact_meta(const std::string& artifact_path, const ArtifactMeta& meta);
std::optional<ArtifactMeta> read_artifact_meta(const std::string& artifact_path);

}  // namespace acr
