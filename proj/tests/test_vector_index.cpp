#include <doctest.h>

#include "acr/error.hpp"
#include "acr/rng.hpp"
#include "acr/vector_index.hpp"
#include "support/oracles.hpp"

using namespace acr;

namespace {

std::vector<Chunk> make_chunks(Rng& rng, std::size_t n) {
    const std::vector<std::string> vocab = {"lesion",  "margin", "node",   "relapse",
                                            "staging", "biopsy", "course", "imaging"};
    std::vector<Chunk> chunks;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const int words = static_cast<int>(rng.uniform_int(1, 12));
        for (int w = 0; w < words; ++w) {
            if (w) text += ' ';
            text += vocab[static_cast<std::size_t>(rng.uniform_int(0, 7))];
        }
        char id[16];
        std::snprintf(id, sizeof(id), "c%05zu", i);
        chunks.push_back(
            Chunk{id, "p" + std::to_string(i % 37), "d" + std::to_string(i), 0, 4, text});
    }
    return chunks;
}

}  // namespace

TEST_SUITE("vector_index") {

TEST_CASE("index contains one entry per chunk") {
    Rng rng(1);
    BuiltinEmbedder embedder(32, 9);
    const auto chunks = make_chunks(rng, 5);
    const auto index = build_index(chunks, embedder);
    CHECK(index.size() == 5);
    CHECK(index.fingerprint() == embedder.fingerprint());
}

TEST_CASE("duplicate chunk ids are rejected") {
    Rng rng(2);
    BuiltinEmbedder embedder(32, 9);
    auto chunks = make_chunks(rng, 3);
    chunks[2].chunk_id = chunks[0].chunk_id;
    CHECK_THROWS_AS(build_index(chunks, embedder), DataError);
    CHECK_THROWS_AS(build_index({}, embedder), DataError);
}

TEST_CASE("an indexed vector queries itself at score 1") {
    Rng rng(3);
    BuiltinEmbedder embedder(64, 11);
    const auto chunks = make_chunks(rng, 40);
    const auto index = build_index(chunks, embedder);
    const auto query = embedder.embed_one(chunks[17].text);
    const auto hits = index.search(query, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("k larger than the index returns everything ranked") {
    Rng rng(4);
    BuiltinEmbedder embedder(32, 9);
    const auto index = build_index(make_chunks(rng, 3), embedder);
    const auto hits = index.search(embed_builtin("lesion", 32, 9), 10);
    CHECK(hits.size() == 3);
    for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].score >= hits[i].score);
}

TEST_CASE("dimension mismatch and k=0 are rejected") {
    Rng rng(5);
    BuiltinEmbedder embedder(32, 9);
    const auto index = build_index(make_chunks(rng, 3), embedder);
    CHECK_THROWS_AS(index.search(embed_builtin("x", 16, 9), 1), DataError);
    CHECK_THROWS_AS(index.search(embed_builtin("x", 32, 9), 0), DataError);
}

TEST_CASE("search equals the brute-force oracle on 1000 entries x 20 queries") {
    Rng rng(6);
    BuiltinEmbedder embedder(48, 21);
    const auto chunks = make_chunks(rng, 1000);
    const auto index = build_index(chunks, embedder);
    for (int q = 0; q < 20; ++q) {
        EmbeddingVector query(48);
        for (auto& x : query) x = rng.uniform_real(-1.0, 1.0);
        l2_normalize(query);
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 50));
        const auto got = index.search(query, k);
        const auto want = oracle::brute_force_search(index, query, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].chunk_id == want[i].chunk_id);
            CHECK(got[i].score == want[i].score);
        }
        // scores bounded and monotone non-increasing
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].score <= 1.0 + 1e-9);
            CHECK(got[i].score >= -1.0 - 1e-9);
            if (i) CHECK(got[i - 1].score >= got[i].score);
        }
    }
}

TEST_CASE("parallel and serial search agree bit-exactly") {
    Rng rng(7);
    BuiltinEmbedder embedder(32, 13);
    const auto index = build_index(make_chunks(rng, 500), embedder);
    for (int q = 0; q < 10; ++q) {
        EmbeddingVector query(32);
        for (auto& x : query) x = rng.uniform_real(-1.0, 1.0);
        l2_normalize(query);
        const auto a = index.search(query, 25);
        const auto b = index.search_serial(query, 25);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].chunk_id == b[i].chunk_id);
            CHECK(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("ties break by ascending chunk_id") {
    // two identical texts embed identically; their order must be by id
    BuiltinEmbedder embedder(32, 9);
    std::vector<Chunk> chunks = {
        {"c2", "p1", "d1", 0, 1, "margin"},
        {"c1", "p2", "d2", 0, 1, "margin"},
        {"c3", "p3", "d3", 0, 1, "unrelated words entirely"},
    };
    const auto index = build_index(chunks, embedder);
    const auto hits = index.search(embedder.embed_one("margin"), 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].chunk_id == "c1");
    CHECK(hits[1].chunk_id == "c2");
}

TEST_CASE("serialization round-trips byte-identically and rebuild matches") {
    Rng rng(8);
    BuiltinEmbedder embedder(32, 17);
    const auto chunks = make_chunks(rng, 64);
    const auto index = build_index(chunks, embedder);
    const std::string bytes = index.serialize();
    const auto loaded = VectorIndex::deserialize(bytes);
    CHECK(loaded.serialize() == bytes);
    CHECK(loaded.size() == index.size());
    CHECK(loaded.fingerprint() == index.fingerprint());

    const auto rebuilt = build_index(chunks, embedder);
    CHECK(rebuilt.serialize() == bytes);
}

TEST_CASE("corrupt index bytes are rejected") {
    Rng rng(9);
    BuiltinEmbedder embedder(32, 17);
    const auto index = build_index(make_chunks(rng, 4), embedder);
    std::string bytes = index.serialize();
    CHECK_THROWS_AS(VectorIndex::deserialize(bytes.substr(0, bytes.size() - 3)), DataError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(VectorIndex::deserialize(bytes), DataError);
}

}  // TEST_SUITE
