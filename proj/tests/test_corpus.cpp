#include <doctest.h>

#include <string>

#include "acr/corpus.hpp"
#include "acr/error.hpp"
#include "acr/rng.hpp"
#include "support/oracles.hpp"

using namespace acr;

TEST_SUITE("corpus") {

TEST_CASE("load groups and sorts per patient") {
    const std::string jsonl =
        R"({"patient_id":"p1","doc_id":"d2","authored_at":"2020-05-01","doc_type":"note","text":"later note"})"
        "\n"
        R"({"patient_id":"p1","doc_id":"d1","authored_at":"2019-01-15","doc_type":"note","text":"earlier note"})"
        "\n"
        R"({"patient_id":"p2","doc_id":"d3","authored_at":"2021-07-09","doc_type":"note","text":"only note"})"
        "\n";
    const Corpus corpus = parse_corpus_jsonl(jsonl);
    CHECK(corpus.patient_count() == 2);
    REQUIRE(corpus.patients.at("p1").size() == 2);
    CHECK(corpus.patients.at("p1")[0].doc_id == "d1");
    CHECK(corpus.patients.at("p1")[1].doc_id == "d2");
    CHECK(corpus.document_count() == 3);
}

TEST_CASE("same-day documents order by doc_id") {
    const std::string jsonl =
        R"({"patient_id":"p1","doc_id":"b","authored_at":"2020-05-01","doc_type":"note","text":"x"})"
        "\n"
        R"({"patient_id":"p1","doc_id":"a","authored_at":"2020-05-01","doc_type":"note","text":"y"})"
        "\n";
    const Corpus corpus = parse_corpus_jsonl(jsonl);
    CHECK(corpus.patients.at("p1")[0].doc_id == "a");
}

TEST_CASE("duplicate doc_id reports both line numbers") {
    const std::string jsonl =
        R"({"patient_id":"p1","doc_id":"d1","authored_at":"2020-05-01","doc_type":"note","text":"x"})"
        "\n"
        R"({"patient_id":"p2","doc_id":"d1","authored_at":"2020-06-01","doc_type":"note","text":"y"})"
        "\n";
    try {
        parse_corpus_jsonl(jsonl, "f.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("d1") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("malformed line, empty text and invalid date are rejected with line numbers") {
    CHECK_THROWS_WITH_AS(parse_corpus_jsonl("not json\n", "f.jsonl"),
                         doctest::Contains("f.jsonl:1"), DataError);
    CHECK_THROWS_AS(parse_corpus_jsonl(
                        R"({"patient_id":"p","doc_id":"d","authored_at":"2020-01-01","doc_type":"n","text":""})"
                        "\n"),
                    DataError);
    CHECK_THROWS_AS(parse_corpus_jsonl(
                        R"({"patient_id":"p","doc_id":"d","authored_at":"2020-02-30","doc_type":"n","text":"x"})"
                        "\n"),
                    DataError);
}

TEST_CASE("tokenize splits on whitespace runs") {
    const auto tokens = tokenize("stage II,  ER+");
    REQUIRE(tokens.size() == 3);
    CHECK(tokens[0] == "stage");
    CHECK(tokens[1] == "II,");
    CHECK(tokens[2] == "ER+");
    CHECK(tokenize("").empty());

    std::string big;
    for (int i = 0; i < 2200; ++i) big += "w" + std::to_string(i) + " ";
    CHECK(token_count(big) == 2200);
}

namespace {

Document doc_with_tokens(std::size_t n) {
    Document doc;
    doc.patient_id = "p1";
    doc.doc_id = "d1";
    doc.authored_at = *Date::parse("2020-01-01");
    doc.doc_type = "note";
    for (std::size_t i = 0; i < n; ++i) {
        if (i) doc.text += ' ';
        doc.text += "t" + std::to_string(i);
    }
    if (n == 0) doc.text = " ";
    return doc;
}

}  // namespace

TEST_CASE("chunking follows the stride rule") {
    const auto chunks = chunk_document(doc_with_tokens(2200), 1000, 100);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].token_start == 0);
    CHECK(chunks[0].token_end == 1000);
    CHECK(chunks[1].token_start == 900);
    CHECK(chunks[1].token_end == 1900);
    CHECK(chunks[2].token_start == 1800);
    CHECK(chunks[2].token_end == 2200);
    CHECK(chunks[0].chunk_id == "d1:000000");
    CHECK(chunks[2].chunk_id == "d1:000002");
}

TEST_CASE("short document yields one chunk") {
    const auto chunks = chunk_document(doc_with_tokens(500), 1000, 100);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].token_start == 0);
    CHECK(chunks[0].token_end == 500);
}

TEST_CASE("overlap >= chunk_size is rejected") {
    CHECK_THROWS_AS(chunk_document(doc_with_tokens(10), 5, 5), DataError);
    CHECK_THROWS_AS(chunk_document(doc_with_tokens(10), 0, 0), DataError);
}

TEST_CASE("whitespace-only text yields no chunks") {
    CHECK(chunk_document(doc_with_tokens(0), 1000, 100).empty());
}

TEST_CASE("coverage, count formula and determinism over random instances") {
    Rng rng(123);
    for (int round = 0; round < 300; ++round) {
        const std::size_t tokens = static_cast<std::size_t>(rng.uniform_int(1, 400));
        const std::size_t chunk_size = static_cast<std::size_t>(rng.uniform_int(1, 60));
        const std::size_t overlap =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(chunk_size) - 1));
        const Document doc = doc_with_tokens(tokens);
        const auto chunks = chunk_document(doc, chunk_size, overlap);

        CHECK(chunks.size() == oracle::expected_chunk_count(tokens, chunk_size, overlap));

        // non-overlapped portions reproduce the token stream exactly
        std::vector<std::string> reconstructed;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            const std::size_t from = i == 0 ? 0 : std::max(chunks[i - 1].token_end,
                                                           chunks[i].token_start);
            const auto words = tokenize(chunks[i].text);
            for (std::size_t t = from - chunks[i].token_start; t < words.size(); ++t)
                reconstructed.emplace_back(words[t]);
        }
        const auto original = tokenize(doc.text);
        REQUIRE(reconstructed.size() == original.size());
        for (std::size_t i = 0; i < original.size(); ++i) CHECK(reconstructed[i] == original[i]);

        // spans chain with the stride and stay within bounds
        const std::size_t stride = chunk_size - overlap;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            CHECK(chunks[i].token_end - chunks[i].token_start <= chunk_size);
            CHECK(chunks[i].token_end > chunks[i].token_start);
            if (i > 0) CHECK(chunks[i].token_start == chunks[i - 1].token_start + stride);
        }
        CHECK(chunks.back().token_end == tokens);

        const auto again = chunk_document(doc, chunk_size, overlap);
        REQUIRE(again.size() == chunks.size());
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            CHECK(again[i].chunk_id == chunks[i].chunk_id);
            CHECK(again[i].text == chunks[i].text);
        }
    }
}

TEST_CASE("corpus at the reference scale loads and validates") {
    // 1436 patients / 115,865 short documents
    std::string jsonl;
    jsonl.reserve(115865 * 96);
    std::size_t doc_serial = 0;
    for (int p = 0; p < 1436; ++p) {
        const int docs = 80 + (p < 115865 - 1436 * 80 ? 1 : 0);  // 80.68 docs on average
        for (int d = 0; d < docs; ++d) {
            jsonl += R"({"patient_id":"p)" + std::to_string(p) + R"(","doc_id":"d)" +
                     std::to_string(doc_serial++) +
                     R"(","authored_at":"2020-01-01","doc_type":"note","text":"follow-up visit note )" +
                     std::to_string(d) + R"("})" + "\n";
        }
    }
    const Corpus corpus = parse_corpus_jsonl(jsonl);
    CHECK(corpus.patient_count() == 1436);
    CHECK(corpus.document_count() == 115865);
}

}  // TEST_SUITE
