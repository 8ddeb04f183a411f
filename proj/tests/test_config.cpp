#include <doctest.h>

#include <cstdio>
#include <cstdlib>

#include "acr/config.hpp"
#include "acr/error.hpp"
#include "acr/io.hpp"

using namespace acr;

TEST_SUITE("config") {

TEST_CASE("defaults match the reference configuration") {
    const RunConfig cfg;
    CHECK(cfg.chunk_size == 1000);
    CHECK(cfg.overlap == 100);
    CHECK(cfg.top_k_chunks == 1000);
    CHECK(cfg.alpha == 50);
    CHECK(cfg.beta == 10);
    CHECK(cfg.max_reader_calls == 3);
    CHECK(cfg.context_budget == 128000);
    CHECK(cfg.embedder.kind == "builtin");
    CHECK(cfg.embedder.dimension == 256);
    CHECK(cfg.reader.kind == "mock");
    CHECK(cfg.reader.temperature == 0.0);
    CHECK(cfg.reader.top_p == 0.95);
}

TEST_CASE("toml subset parses sections and scalar types") {
    const std::string toml = R"(
# benchmark configuration
chunk_size = 500
overlap = 50
seed = 7

[embedder]
kind = "builtin"
dimension = 128

[reader]
kind = "external"
model = "gpt-sim"
base_url = "http://127.0.0.1:9999"
temperature = 0.25
)";
    const RunConfig cfg = RunConfig::from_toml(TomlTable::parse(toml));
    CHECK(cfg.chunk_size == 500);
    CHECK(cfg.overlap == 50);
    CHECK(cfg.seed == 7);
    CHECK(cfg.embedder.dimension == 128);
    CHECK(cfg.reader.kind == "external");
    CHECK(cfg.reader.model == "gpt-sim");
    CHECK(cfg.reader.temperature == 0.25);
}

TEST_CASE("environment interpolation applies inside strings only") {
    setenv("ACR_CFG_PROBE", "resolved", 1);
    const auto toml = TomlTable::parse("[reader]\nauth_env = \"${ACR_CFG_PROBE}_suffix\"\n");
    CHECK(toml.get_string("reader", "auth_env", "") == "resolved_suffix");
    unsetenv("ACR_CFG_PROBE");
}

TEST_CASE("invalid values are rejected") {
    CHECK_THROWS_AS(RunConfig::from_toml(TomlTable::parse("overlap = 1000\nchunk_size = 1000\n")),
                    DataError);
    CHECK_THROWS_AS(RunConfig::from_toml(TomlTable::parse("alpha = 10\nbeta = 10\n")), DataError);
    CHECK_THROWS_AS(RunConfig::from_toml(TomlTable::parse("[embedder]\nkind = \"magic\"\n")),
                    DataError);
    CHECK_THROWS_AS(TomlTable::parse("key value without equals\n"), DataError);
}

TEST_CASE("config hash is stable and parallelism-independent") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    b.jobs = 8;
    CHECK(a.hash() == b.hash());  // jobs must not change artifact hashes
    b.chunk_size = 512;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("artifact meta sidecar round-trips") {
    const std::string path = "test_artifact.bin";
    write_file_atomic(path, "payload");
    write_artifact_meta(path, {"cafebabe", 42, kToolVersion});
    const auto meta = read_artifact_meta(path);
    REQUIRE(meta.has_value());
    CHECK(meta->config_hash == "cafebabe");
    CHECK(meta->seed == 42);
    CHECK(meta->tool_version == kToolVersion);
    std::remove(path.c_str());
    std::remove((path + ".meta.json").c_str());
    CHECK(!read_artifact_meta("no_such_artifact").has_value());
}

}  // TEST_SUITE
