#include "acr/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/io.hpp"
#include "acr/rng.hpp"

namespace acr {

namespace {

std::string trim_ws(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string expand_env(const std::string& s) {
    std::string out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t at = s.find("${", pos);
        if (at == std::string::npos) {
            out += s.substr(pos);
            break;
        }
        const std::size_t close = s.find('}', at + 2);
        if (close == std::string::npos) {
            out += s.substr(pos);
            break;
        }
        out += s.substr(pos, at - pos);
        const std::string name = s.substr(at + 2, close - at - 2);
        if (const char* v = std::getenv(name.c_str())) out += v;
        pos = close + 1;
    }
    return out;
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text, const std::string& origin) {
    TomlTable table;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim_ws(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw DataError(origin + ":" + std::to_string(line_no) + ": malformed section");
            section = trim_ws(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim_ws(t.substr(0, eq));
        std::string value = trim_ws(t.substr(eq + 1));
        if (!value.empty() && value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw DataError(origin + ":" + std::to_string(line_no) +
                                ": unterminated string value");
            value = expand_env(value.substr(1, value.size() - 2));
        } else {
            const std::size_t hash = value.find(" #");
            if (hash != std::string::npos) value = trim_ws(value.substr(0, hash));
        }
        table.values_[{section, key}] = value;
    }
    return table;
}

TomlTable TomlTable::load(const std::string& path) { return parse(read_file(path), path); }

bool TomlTable::has(const std::string& section, const std::string& key) const {
    return values_.count({section, key}) > 0;
}

std::string TomlTable::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
    auto it = values_.find({section, key});
    return it == values_.end() ? fallback : it->second;
}

std::int64_t TomlTable::get_int(const std::string& section, const std::string& key,
                                std::int64_t fallback) const {
    auto it = values_.find({section, key});
    if (it == values_.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' is not an integer: " + it->second);
    }
}

double TomlTable::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
    auto it = values_.find({section, key});
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' is not a number: " + it->second);
    }
}

bool TomlTable::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
    auto it = values_.find({section, key});
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw DataError("config key '" + key + "' is not a boolean: " + it->second);
}

RunConfig RunConfig::from_toml(const TomlTable& toml) {
    RunConfig cfg;
    cfg.chunk_size = static_cast<std::size_t>(toml.get_int("", "chunk_size", 1000));
    cfg.overlap = static_cast<std::size_t>(toml.get_int("", "overlap", 100));
    cfg.top_k_chunks = static_cast<std::size_t>(toml.get_int("", "top_k_chunks", 1000));
    cfg.alpha = static_cast<std::size_t>(toml.get_int("", "alpha", 50));
    cfg.beta = static_cast<std::size_t>(toml.get_int("", "beta", 10));
    cfg.max_reader_calls = static_cast<std::size_t>(toml.get_int("", "max_reader_calls", 3));
    cfg.context_budget = static_cast<std::size_t>(toml.get_int("", "context_budget", 128000));
    cfg.seed = static_cast<std::uint64_t>(toml.get_int("", "seed", 42));
    cfg.jobs = static_cast<int>(toml.get_int("", "jobs", 0));

    cfg.embedder.kind = toml.get_string("embedder", "kind", "builtin");
    cfg.embedder.dimension = static_cast<std::size_t>(toml.get_int("embedder", "dimension", 256));
    cfg.embedder.seed = static_cast<std::uint64_t>(
        toml.get_int("embedder", "seed", static_cast<std::int64_t>(cfg.seed)));
    cfg.embedder.base_url = toml.get_string("embedder", "base_url", "");
    cfg.embedder.path = toml.get_string("embedder", "path", "/v1/embeddings");
    cfg.embedder.model = toml.get_string("embedder", "model", "");
    cfg.embedder.auth_env = toml.get_string("embedder", "auth_env", "");
    cfg.embedder.max_batch = static_cast<std::size_t>(toml.get_int("embedder", "max_batch", 64));
    cfg.embedder.max_attempts = static_cast<int>(toml.get_int("embedder", "max_attempts", 3));
    if (cfg.embedder.kind != "builtin" && cfg.embedder.kind != "external")
        throw DataError("embedder.kind must be builtin or external");

    cfg.reader.kind = toml.get_string("reader", "kind", "mock");
    cfg.reader.base_url = toml.get_string("reader", "base_url", "");
    cfg.reader.path = toml.get_string("reader", "path", "/v1/chat/completions");
    cfg.reader.model = toml.get_string("reader", "model", "");
    cfg.reader.auth_env = toml.get_string("reader", "auth_env", "");
    cfg.reader.temperature = toml.get_double("reader", "temperature", 0.0);
    cfg.reader.top_p = toml.get_double("reader", "top_p", 0.95);
    cfg.reader.max_attempts = static_cast<int>(toml.get_int("reader", "max_attempts", 3));
    if (cfg.reader.kind != "mock" && cfg.reader.kind != "external")
        throw DataError("reader.kind must be mock or external");

    if (cfg.overlap >= cfg.chunk_size) throw DataError("overlap must be < chunk_size");
    if (cfg.beta < 1 || cfg.beta >= cfg.alpha) throw DataError("require 1 <= beta < alpha");
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    return from_toml(TomlTable::load(path));
}

std::string RunConfig::canonical() const {
    nlohmann::ordered_json j;
    j["chunk_size"] = chunk_size;
    j["overlap"] = overlap;
    j["top_k_chunks"] = top_k_chunks;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["max_reader_calls"] = max_reader_calls;
    j["context_budget"] = context_budget;
    j["seed"] = seed;
    j["embedder"] = {{"kind", embedder.kind}, {"dimension", embedder.dimension},
                     {"seed", embedder.seed}, {"model", embedder.model},
                     {"base_url", embedder.base_url}};
    j["reader"] = {{"kind", reader.kind}, {"model", reader.model},
                   {"temperature", reader.temperature}, {"top_p", reader.top_p},
                   {"base_url", reader.base_url}};
    // jobs intentionally excluded: parallelism must not change artifacts
    return j.dump();
}

std::string RunConfig::hash() const { return hash_hex(fnv1a64(canonical())); }

void write_artifact_meta(const std::string& artifact_path, const ArtifactMeta& meta) {
    nlohmann::ordered_json j;
    j["config_hash"] = meta.config_hash;
    j["seed"] = meta.seed;
    j["tool_version"] = meta.tool_version;
    write_file_atomic(artifact_path + ".meta.json", j.dump(2) + "\n");
}

std::optional<ArtifactMeta> read_artifact_meta(const std::string& artifact_path) {
    std::ifstream in(artifact_path + ".meta.json", std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    ArtifactMeta meta;
    meta.config_hash = j.value("config_hash", std::string());
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.tool_version = j.value("tool_version", std::string());
    return meta;
}

}  // namespace acr
