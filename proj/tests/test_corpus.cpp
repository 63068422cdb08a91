#include <catch2/catch_amalgamated.hpp>

#include <moodangels/corpus.hpp>
#include <moodangels/provider.hpp>
#include <moodangels/scales.hpp>

#include <nlohmann/json.hpp>

#include "helpers.hpp"

using namespace moodangels;
using test_helpers::data_path;
using test_helpers::fixture_path;
using test_helpers::temp_dir;

static const scales::ScaleCatalog& catalog() {
    static auto cat = scales::ScaleCatalog::load(data_path("scale_catalog.json"));
    return cat;
}

TEST_CASE("bundled 20-case fixture matches its manifest", "[corpus]") {
    auto cases = corpus::load_cases(fixture_path("cases20.jsonl"), "jsonl", &catalog());
    REQUIRE(cases.size() == 20);
    auto counts = corpus::count_labels(cases);
    auto manifest = nlohmann::json::parse(read_file(fixture_path("cases20_manifest.json")));
    REQUIRE(counts.total() == manifest.at("total").get<size_t>());
    REQUIRE(counts.mood == manifest["by_label"].at("mood_disorder").get<size_t>());
    REQUIRE(counts.normal == manifest["by_label"].at("normal").get<size_t>());
    REQUIRE(counts.other == manifest["by_label"].at("other_disease").get<size_t>());
    // label partition: every case lands in exactly one bucket
    REQUIRE(counts.normal + counts.mood + counts.other == cases.size());
}

TEST_CASE("empty case file loads to an empty list", "[corpus]") {
    auto dir = temp_dir("corpus_empty");
    write_file(dir / "empty.jsonl", "");
    auto cases = corpus::load_cases(dir / "empty.jsonl", "jsonl", &catalog());
    REQUIRE(cases.empty());
    REQUIRE(corpus::count_labels(cases).total() == 0);
}

TEST_CASE("malformed rows name the row and field", "[corpus]") {
    auto dir = temp_dir("corpus_malformed");
    write_file(dir / "bad.jsonl", R"({"case_id":"1"})"
                                  "\nnot json at all\n");
    REQUIRE_THROWS_WITH(corpus::load_cases(dir / "bad.jsonl", "jsonl", &catalog()),
                        Catch::Matchers::ContainsSubstring("row 2"));

    write_file(dir / "badfield.jsonl",
               R"({"case_id":"1","scale_scores":{"phq9_Q1":"high"}})" "\n");
    REQUIRE_THROWS_WITH(corpus::load_cases(dir / "badfield.jsonl", "jsonl", &catalog()),
                        Catch::Matchers::ContainsSubstring("phq9_Q1"));
}

TEST_CASE("unknown item ids are named in the error", "[corpus]") {
    auto dir = temp_dir("corpus_unknown");
    write_file(dir / "c.jsonl", R"({"case_id":"9","scale_scores":{"nope_Q1":2}})" "\n");
    REQUIRE_THROWS_WITH(corpus::load_cases(dir / "c.jsonl", "jsonl", &catalog()),
                        Catch::Matchers::ContainsSubstring("nope_Q1"));
}

TEST_CASE("scores outside the item range are rejected", "[corpus]") {
    auto dir = temp_dir("corpus_range");
    write_file(dir / "c.jsonl", R"({"case_id":"9","scale_scores":{"phq9_Q1":7}})" "\n");
    REQUIRE_THROWS_WITH(corpus::load_cases(dir / "c.jsonl", "jsonl", &catalog()),
                        Catch::Matchers::ContainsSubstring("phq9_Q1"));
}

TEST_CASE("absent stage must match empty narrative fields", "[corpus]") {
    auto dir = temp_dir("corpus_absent");
    write_file(dir / "c.jsonl",
               R"({"case_id":"9","record_stage":"absent","present_illness":"something"})" "\n");
    REQUIRE_THROWS_WITH(corpus::load_cases(dir / "c.jsonl", "jsonl", &catalog()),
                        Catch::Matchers::ContainsSubstring("absent"));
}

TEST_CASE("save/load round-trip preserves every field", "[corpus]") {
    auto cases = corpus::load_cases(fixture_path("cases20.jsonl"), "jsonl", &catalog());
    auto dir = temp_dir("corpus_roundtrip");
    corpus::save_cases_jsonl(dir / "out.jsonl", cases);
    auto again = corpus::load_cases(dir / "out.jsonl", "jsonl", &catalog());
    REQUIRE(again.size() == cases.size());
    for (size_t i = 0; i < cases.size(); ++i) {
        CHECK(again[i].case_id == cases[i].case_id);
        CHECK(again[i].gender == cases[i].gender);
        CHECK(again[i].age == cases[i].age);
        CHECK(again[i].occupation == cases[i].occupation);
        CHECK(again[i].visit_date == cases[i].visit_date);
        CHECK(again[i].chief_complaint == cases[i].chief_complaint);
        CHECK(again[i].present_illness == cases[i].present_illness);
        CHECK(again[i].record_stage == cases[i].record_stage);
        CHECK(again[i].structured_items == cases[i].structured_items);
        CHECK(again[i].scale_scores == cases[i].scale_scores);
        CHECK(again[i].gold_label == cases[i].gold_label);
    }
}

TEST_CASE("csv loader ingests the tabular fixture", "[corpus]") {
    auto cases = corpus::load_cases(fixture_path("moodsyn_test140.csv"), "csv", &catalog());
    REQUIRE(cases.size() == 140);
    auto counts = corpus::count_labels(cases);
    REQUIRE(counts.mood == 73);
    REQUIRE(counts.normal == 67);
    for (const auto& rec : cases) {
        REQUIRE(rec.record_stage == corpus::RecordStage::absent);
        REQUIRE(rec.scale_scores.count("hamd_total_score") == 1);
        // skipped columns never show up as scores
        REQUIRE(rec.scale_scores.size() == 22);
    }
}

// ---------------------------------------------------------------------------
// Provider cache
// ---------------------------------------------------------------------------

TEST_CASE("cache hit performs zero provider activity", "[corpus]") {
    auto dir = temp_dir("cache_hit");
    corpus::ProviderCache cache(dir);
    int calls = 0;
    auto call = [&] {
        ++calls;
        return std::string("answer");
    };
    REQUIRE(cache.lookup_or_call("prov", "model", "prompt", call) == "answer");
    REQUIRE(cache.lookup_or_call("prov", "model", "prompt", call) == "answer");
    REQUIRE(calls == 1);
    REQUIRE(cache.hits() == 1);
}

TEST_CASE("prompts differing by one character get distinct entries", "[corpus]") {
    auto k1 = corpus::ProviderCache::key("p", "m", "prompt a");
    auto k2 = corpus::ProviderCache::key("p", "m", "prompt b");
    REQUIRE(k1 != k2);
    // model id is part of the key, so provider upgrades never alias
    REQUIRE(corpus::ProviderCache::key("p", "m2", "prompt a") != k1);
}

TEST_CASE("100 random prompts replay byte-identically", "[corpus]") {
    auto dir = temp_dir("cache_replay");
    corpus::ProviderCache cache(dir);
    Rng rng(99);
    std::vector<std::pair<std::string, std::string>> seen;
    for (int i = 0; i < 100; ++i) {
        std::string prompt = "prompt-" + std::to_string(rng.next());
        std::string response = "response-" + std::to_string(rng.next());
        cache.lookup_or_call("p", "m", prompt, [&] { return response; });
        seen.emplace_back(prompt, response);
    }
    size_t miss_before = cache.misses();
    for (const auto& [prompt, response] : seen) {
        auto replay = cache.lookup_or_call("p", "m", prompt, [&]() -> std::string {
            throw Error("must not be called");
        });
        REQUIRE(replay == response);
    }
    REQUIRE(cache.misses() == miss_before);
}

TEST_CASE("determinism guard rejects conflicting stores", "[corpus]") {
    auto dir = temp_dir("cache_guard");
    corpus::ProviderCache cache(dir);
    auto key = corpus::ProviderCache::key("p", "m", "x");
    cache.store(key, "p", "m", "one");
    cache.store(key, "p", "m", "one"); // idempotent
    REQUIRE_THROWS_WITH(cache.store(key, "p", "m", "two"),
                        Catch::Matchers::ContainsSubstring("determinism guard"));
}

TEST_CASE("provider failure with no cached value reports retries", "[corpus]") {
    auto dir = temp_dir("cache_fail");
    corpus::ProviderCache cache(dir);
    int calls = 0;
    auto boom = [&]() -> std::string {
        ++calls;
        throw Error("connection refused");
    };
    REQUIRE_THROWS_WITH(cache.lookup_or_call("p", "m", "x", boom, 2),
                        Catch::Matchers::ContainsSubstring("3 attempts"));
    REQUIRE(calls == 3);
}
