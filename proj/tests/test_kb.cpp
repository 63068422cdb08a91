#include <catch2/catch_amalgamated.hpp>

#include <moodangels/kb.hpp>
#include <moodangels/provider.hpp>

#include <nlohmann/json.hpp>

#include "helpers.hpp"

using namespace moodangels;
using test_helpers::fixture_path;
using test_helpers::temp_dir;

static kb::KnowledgeBase fixture_kb() { return kb::KnowledgeBase::load(fixture_path("kb_fixture.json")); }

TEST_CASE("fixture kb covers all 18 classes with matching counts", "[kb]") {
    auto knowledge = fixture_kb();
    REQUIRE(knowledge.size() == 33);
    REQUIRE(knowledge.covers_mood_disorders());

    // independent count straight off the raw JSON
    auto raw = nlohmann::json::parse(read_file(fixture_path("kb_fixture.json")));
    std::map<std::string, size_t> expected;
    for (const auto& e : raw) expected[e.at("disorder_class").get<std::string>()]++;
    REQUIRE(expected.size() == 18);
    REQUIRE(knowledge.counts_by_class() == expected);
}

TEST_CASE("entry ids are derived from content", "[kb]") {
    auto knowledge = fixture_kb();
    for (const auto& e : knowledge.entries())
        REQUIRE(e.entry_id ==
                kb::CriterionEntry::derive_id(e.disorder_name, e.kind, e.text));
}

TEST_CASE("load(export(store)) round-trips field-equal", "[kb]") {
    auto knowledge = fixture_kb();
    auto dir = temp_dir("kb_roundtrip");
    knowledge.save(dir / "kb.json");
    auto again = kb::KnowledgeBase::load(dir / "kb.json");
    REQUIRE(again.size() == knowledge.size());
    for (size_t i = 0; i < knowledge.size(); ++i) {
        CHECK(again.entries()[i].entry_id == knowledge.entries()[i].entry_id);
        CHECK(again.entries()[i].text == knowledge.entries()[i].text);
        CHECK(again.entries()[i].kind == knowledge.entries()[i].kind);
        CHECK(again.entries()[i].disorder_class == knowledge.entries()[i].disorder_class);
    }

    auto tsv = knowledge.export_for_review();
    auto imported = kb::KnowledgeBase::import_from_review(tsv);
    REQUIRE(imported.size() == knowledge.size());
}

TEST_CASE("duplicate entry ids are a load error", "[kb]") {
    auto raw = nlohmann::json::parse(read_file(fixture_path("kb_fixture.json")));
    raw.push_back(raw.at(0));
    auto dir = temp_dir("kb_dup");
    write_file(dir / "dup.json", raw.dump());
    REQUIRE_THROWS_WITH(kb::KnowledgeBase::load(dir / "dup.json"),
                        Catch::Matchers::ContainsSubstring("duplicate entry_id"));
}

TEST_CASE("cross-referencing and unknown-class entries are rejected", "[kb]") {
    kb::KnowledgeBase knowledge;
    kb::CriterionEntry e;
    e.disorder_class = "Depressive Disorders";
    e.disorder_name = "Major depressive disorder";
    e.kind = kb::CriterionKind::diagnostic;
    e.text = "Symptoms as described above, plus low mood.";
    REQUIRE_THROWS_WITH(knowledge.add(e), Catch::Matchers::ContainsSubstring("cross-reference"));
    e.text = "Low mood most of the day.";
    e.disorder_class = "Imaginary Disorders";
    REQUIRE_THROWS_WITH(knowledge.add(e), Catch::Matchers::ContainsSubstring("disorder_class"));
}

// ---------------------------------------------------------------------------
// provider-assisted extraction
// ---------------------------------------------------------------------------

static const char* kManicSource =
    "A distinct period of abnormally and persistently elevated, expansive, or irritable mood and "
    "abnormally and persistently increased goal-directed activity or energy, lasting at least 1 "
    "week and present most of the day, nearly every day (or any duration if hospitalization is "
    "necessary).";

TEST_CASE("diagnostic extraction keeps age and duration restrictions", "[kb]") {
    llm::ScriptedProvider provider;
    provider.add_rule(
        {{"summarize the criteria"},
         R"(["Manic episode: Elevated, expansive, or irritable mood, accompanied by increased energy and activity, lasting at least 1 week and present most of the day, nearly every day."])"});
    auto entries = kb::extract_diagnostic(kManicSource, "Bipolar I disorder",
                                          "Bipolar and Related Disorders", provider);
    REQUIRE(entries.size() == 1);
    REQUIRE_THAT(entries[0].text,
                 Catch::Matchers::StartsWith("Manic episode: Elevated, expansive, or irritable mood"));
    REQUIRE(entries[0].kind == kb::CriterionKind::diagnostic);
}

TEST_CASE("dropping a duration restriction fails validation", "[kb]") {
    llm::ScriptedProvider provider;
    provider.add_rule({{"summarize the criteria"},
                       R"(["Manic episode: elevated mood with increased energy."])"});
    REQUIRE_THROWS_WITH(kb::extract_diagnostic(kManicSource, "Bipolar I disorder",
                                               "Bipolar and Related Disorders", provider),
                        Catch::Matchers::ContainsSubstring("at least 1 week"));
}

TEST_CASE("a 3-bullet source splits into 3 standalone entries", "[kb]") {
    llm::ScriptedProvider provider;
    provider.add_rule({{"summarize the criteria"},
                       R"(["Low mood: persistent sadness most of the day.",
                           "Anhedonia: markedly diminished interest in activities.",
                           "Fatigue: loss of energy nearly every day."])"});
    auto entries = kb::extract_diagnostic("Low mood. Anhedonia. Fatigue.", "Major depressive disorder",
                                          "Depressive Disorders", provider);
    REQUIRE(entries.size() == 3);
    for (const auto& e : entries) {
        REQUIRE(!e.text.empty());
        REQUIRE(e.entry_id.size() == 16);
    }
}

TEST_CASE("empty source text is an error", "[kb]") {
    llm::ScriptedProvider provider;
    REQUIRE_THROWS_AS(kb::extract_diagnostic("  ", "X", "Depressive Disorders", provider), Error);
}

static const std::map<std::string, std::string> kClassMap = {
    {"Attention-deficit/hyperactivity disorder", "Neurodevelopmental Disorders"},
    {"Bipolar disorder", "Bipolar and Related Disorders"},
};

TEST_CASE("differential criteria split into two distinct disorders", "[kb]") {
    llm::ScriptedProvider provider;
    provider.add_rule(
        {{"split the following differential criteria"},
         R"(["Attention-deficit/hyperactivity disorder: rapid speech, racing thoughts, distractibility, and less need for sleep in adolescents and children.",
             "Bipolar disorder: rapid speech, racing thoughts, distractibility, and less need for sleep in adults."])"});
    auto [a, b] = kb::split_differential("ADHD may be misdiagnosed as bipolar disorder...", kClassMap,
                                         provider);
    REQUIRE(a.disorder_name == "Attention-deficit/hyperactivity disorder");
    REQUIRE_THAT(a.text, Catch::Matchers::EndsWith("in adolescents and children."));
    REQUIRE(b.disorder_name == "Bipolar disorder");
    REQUIRE_THAT(b.text, Catch::Matchers::EndsWith("in adults."));
    REQUIRE(a.kind == kb::CriterionKind::differential);
}

TEST_CASE("a single returned entry is corrected once then an error", "[kb]") {
    llm::ScriptedProvider provider;
    provider.add_rule({{"split the following differential criteria"},
                       R"(["Bipolar disorder: rapid speech in adults."])"});
    REQUIRE_THROWS_WITH(kb::split_differential("...", kClassMap, provider),
                        Catch::Matchers::ContainsSubstring("exactly 2"));
    REQUIRE(provider.calls() == 2);
}

TEST_CASE("entries naming the same disorder twice are rejected", "[kb]") {
    llm::ScriptedProvider provider;
    provider.add_rule({{"split the following differential criteria"},
                       R"(["Bipolar disorder: feature one in adults.",
                           "Bipolar disorder: feature two in adults."])"});
    REQUIRE_THROWS_WITH(kb::split_differential("...", kClassMap, provider),
                        Catch::Matchers::ContainsSubstring("same disorder"));
}
