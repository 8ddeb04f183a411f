#include <doctest.h>

#include <cmath>

#include "acr/embedding.hpp"
#include "acr/error.hpp"
#include "acr/rng.hpp"

using namespace acr;

TEST_SUITE("embedding") {

TEST_CASE("identical texts embed identically") {
    const auto a = embed_builtin("stage II breast cancer", 256, 42);
    const auto b = embed_builtin("stage II breast cancer", 256, 42);
    CHECK(a == b);
    CHECK(dot(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty text maps to the unit vector on axis 0") {
    const auto v = embed_builtin("", 64, 7);
    CHECK(v[0] == 1.0);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] == 0.0);
}

TEST_CASE("bag-of-tokens order invariance") {
    const auto ab = embed_builtin("a b", 128, 42);
    const auto ba = embed_builtin("b a", 128, 42);
    CHECK(dot(ab, ba) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vectors are unit length and finite") {
    Rng rng(5);
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "epsilon"};
    for (int round = 0; round < 100; ++round) {
        std::string text;
        const int n = static_cast<int>(rng.uniform_int(1, 40));
        for (int i = 0; i < n; ++i) {
            if (i) text += ' ';
            text += words[static_cast<std::size_t>(rng.uniform_int(0, 4))];
        }
        const auto v = embed_builtin(text, 32, 99);
        CHECK(std::abs(l2_norm(v) - 1.0) < 1e-6);
        for (double x : v) CHECK(std::isfinite(x));
    }
}

TEST_CASE("different seeds give different hash layouts") {
    const auto a = embed_builtin("breast cancer", 256, 1);
    const auto b = embed_builtin("breast cancer", 256, 2);
    CHECK(dot(a, b) != doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dimension below 2 is rejected") {
    CHECK_THROWS_AS(embed_builtin("x", 1, 0), DataError);
    CHECK_THROWS_AS(BuiltinEmbedder(0, 0), DataError);
}

TEST_CASE("embedder batch preserves order and matches single calls") {
    BuiltinEmbedder embedder(64, 42);
    const std::vector<std::string> texts = {"one two", "three", "four five six", "", "seven"};
    const auto batch = embedder.embed(texts);
    REQUIRE(batch.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i)
        CHECK(batch[i] == embed_builtin(texts[i], 64, 42));
}

TEST_CASE("fingerprint encodes parameters") {
    BuiltinEmbedder embedder(256, 42);
    CHECK(embedder.fingerprint() == "builtin-fh:d=256:seed=42");
    BuiltinEmbedder other(128, 41);
    CHECK(embedder.fingerprint() != other.fingerprint());
}

}  // TEST_SUITE
