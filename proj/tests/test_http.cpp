#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "acr/embedding.hpp"
#include "acr/error.hpp"
#include "acr/retrieval.hpp"

using namespace acr;

namespace {

/// Loopback server fixture; handlers are installed per test case.
struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    LocalServer() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

nlohmann::json embedding_payload(const std::vector<std::vector<double>>& vectors) {
    nlohmann::json data = nlohmann::json::array();
    for (const auto& v : vectors) data.push_back({{"embedding", v}});
    return {{"data", data}};
}

}  // namespace

TEST_SUITE("http") {

TEST_CASE("external embedder returns vectors in input order, normalized") {
    LocalServer ls;
    ls.server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        std::vector<std::vector<double>> vectors;
        for (std::size_t i = 0; i < body.at("input").size(); ++i)
            vectors.push_back({double(i + 1), 0.0, 0.0});
        res.set_content(embedding_payload(vectors).dump(), "application/json");
    });

    ExternalEmbedderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-embed";
    ExternalEmbedder embedder(cfg);
    const auto out = embedder.embed({"a", "b", "c"});
    REQUIRE(out.size() == 3);
    for (const auto& v : out) {
        CHECK(v.size() == 3);
        CHECK(l2_norm(v) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(v[0] == doctest::Approx(1.0));  // direction survives normalization
    }
    CHECK(embedder.dimension() == 3);
    CHECK(embedder.fingerprint() == "external:test-embed:d=3");
}

TEST_CASE("dimension mismatch within a batch is an error") {
    LocalServer ls;
    ls.server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(embedding_payload({{1.0, 0.0}, {1.0, 0.0, 0.0}}).dump(),
                        "application/json");
    });
    ExternalEmbedderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-embed";
    ExternalEmbedder embedder(cfg);
    CHECK_THROWS_AS(embedder.embed({"a", "b"}), ExternalServiceError);
}

TEST_CASE("429 then success retries exactly once") {
    LocalServer ls;
    std::atomic<int> calls{0};
    ls.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        res.set_content(embedding_payload({{0.0, 2.0}}).dump(), "application/json");
    });
    ExternalEmbedderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-embed";
    cfg.backoff_initial_ms = 5;
    ExternalEmbedder embedder(cfg);
    const auto out = embedder.embed({"a"});
    REQUIRE(out.size() == 1);
    CHECK(calls.load() == 2);
    CHECK(embedder.retries() == 1);  // observable retry count
}

TEST_CASE("non-retryable status surfaces the body excerpt") {
    LocalServer ls;
    ls.server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("bad model name", "text/plain");
    });
    ExternalEmbedderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-embed";
    ExternalEmbedder embedder(cfg);
    CHECK_THROWS_WITH_AS(embedder.embed({"a"}), doctest::Contains("bad model name"),
                         ExternalServiceError);
}

TEST_CASE("persistent failure exhausts attempts and reports") {
    LocalServer ls;
    std::atomic<int> calls{0};
    ls.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    ExternalEmbedderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-embed";
    cfg.max_attempts = 3;
    cfg.backoff_initial_ms = 2;
    ExternalEmbedder embedder(cfg);
    CHECK_THROWS_AS(embedder.embed({"a"}), ExternalServiceError);
    CHECK(calls.load() == 3);
}

TEST_CASE("bearer token is read from the configured environment variable") {
    LocalServer ls;
    std::string seen_auth;
    ls.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(embedding_payload({{1.0, 0.0}}).dump(), "application/json");
    });
    setenv("ACR_TEST_TOKEN", "sekret", 1);
    ExternalEmbedderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-embed";
    cfg.auth_env = "ACR_TEST_TOKEN";
    ExternalEmbedder embedder(cfg);
    embedder.embed({"a"});
    CHECK(seen_auth == "Bearer sekret");
    unsetenv("ACR_TEST_TOKEN");
}

TEST_CASE("chat reader parses YES/NO and reprompts once on noise") {
    LocalServer ls;
    std::atomic<int> calls{0};
    ls.server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                               httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        CHECK(body.at("temperature").get<double>() == 0.0);
        CHECK(body.at("top_p").get<double>() == 0.95);
        const int n = calls++;
        const char* reply = n == 0 ? "Well, considering the evidence..." : " yes. ";
        nlohmann::json payload = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}};
        res.set_content(payload.dump(), "application/json");
    });

    ChatReaderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-chat";
    ExternalChatReader reader(cfg);

    std::vector<Chunk> owned = {Chunk{"c1", "p1", "d1", 0, 3, "some evidence text"}};
    std::vector<PackedChunk> chunks = {{&owned[0], 1.0, *Date::parse("2020-01-01")}};
    const auto result = reader.call("breast cancer", nullptr, chunks);
    CHECK(result.answer == ReaderAnswer::yes);
    CHECK(calls.load() == 2);  // unparseable reply triggered exactly one reprompt
}

TEST_CASE("chat reader flags indeterminate after a failed reprompt") {
    LocalServer ls;
    ls.server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        nlohmann::json payload = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "maybe?"}}}}}}};
        res.set_content(payload.dump(), "application/json");
    });
    ChatReaderConfig cfg;
    cfg.base_url = ls.url();
    cfg.model = "test-chat";
    ExternalChatReader reader(cfg);
    std::vector<Chunk> owned = {Chunk{"c1", "p1", "d1", 0, 3, "text"}};
    std::vector<PackedChunk> chunks = {{&owned[0], 1.0, *Date::parse("2020-01-01")}};
    const auto result = reader.call("q", nullptr, chunks);
    CHECK(result.answer == ReaderAnswer::indeterminate);
}

TEST_CASE("chat transport failure is reported as an error result") {
    ChatReaderConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";  // nothing listens on the discard port
    cfg.model = "test-chat";
    cfg.max_attempts = 1;
    cfg.timeout_sec = 1;
    ExternalChatReader reader(cfg);
    std::vector<Chunk> owned = {Chunk{"c1", "p1", "d1", 0, 3, "text"}};
    std::vector<PackedChunk> chunks = {{&owned[0], 1.0, *Date::parse("2020-01-01")}};
    const auto result = reader.call("q", nullptr, chunks);
    CHECK(result.transport_error);
    CHECK(!result.error_message.empty());
}

}  // TEST_SUITE
