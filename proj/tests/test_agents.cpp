#include <catch2/catch_amalgamated.hpp>

#include <moodangels/agents.hpp>
#include <moodangels/playbook.hpp>

#include "helpers.hpp"

using namespace moodangels;
using corpus::CaseRecord;
using test_helpers::data_path;
using test_helpers::fixture_path;

namespace {

struct Fixture {
    scales::ScaleCatalog catalog;
    scales::SelectedItemSet selected;
    kb::KnowledgeBase knowledge;
    retrieval::FallbackEmbedder embedder;
    retrieval::VectorStore kb_store;
    retrieval::VectorStore record_store;
    retrieval::VectorStore scale_store;
    std::vector<CaseRecord> cases;

    Fixture()
        : catalog(scales::ScaleCatalog::load(data_path("scale_catalog.json"))),
          selected(scales::select_items(
              scales::CorrelationTable::load_csv(data_path("correlations_moodsyn.csv")), 0.05,
              {"phq9_Q1", "phq9_Q2"},
              scales::GroupingConfig::load(data_path("selection_groups.json")))),
          knowledge(kb::KnowledgeBase::load(fixture_path("kb_fixture.json"))),
          kb_store(retrieval::build_kb_store(knowledge, embedder)) {
        auto store_cases = corpus::load_cases_jsonl(fixture_path("cases_retrieval.jsonl"));
        record_store = retrieval::build_record_store(store_cases, embedder);
        scale_store = retrieval::build_scale_store(store_cases, embedder, selected, catalog);
        cases = corpus::load_cases_jsonl(fixture_path("cases20.jsonl"), &catalog);
    }

    agents::ToolContext context(llm::Provider* analysis = nullptr) {
        agents::ToolContext ctx;
        ctx.catalog = &catalog;
        ctx.selected = &selected;
        ctx.kb_store = &kb_store;
        ctx.record_store = &record_store;
        ctx.scale_store = &scale_store;
        ctx.embedder = &embedder;
        ctx.analysis_provider = analysis;
        return ctx;
    }

    const CaseRecord& case_by_id(const std::string& id) const {
        for (const auto& c : cases)
            if (c.case_id == id) return c;
        throw Error("no fixture case " + id);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

std::string action_json(const std::string& name, const std::string& digit_id) {
    return nlohmann::json{{"action", {{"name", name}, {"args", {{"digit_id", digit_id}}}}},
                          {"thoughts",
                           {{"plan", "p"}, {"criticism", "c"}, {"observation", "o"},
                            {"reasoning", "r"}}}}
        .dump();
}

std::string finish_json(const std::string& answer, const std::string& reasons = "test reasons") {
    return nlohmann::json{{"action", {{"name", "finish"},
                                      {"args", {{"answer", answer}, {"reasons", reasons}}}}},
                          {"thoughts",
                           {{"plan", "p"}, {"criticism", "c"}, {"observation", "o"},
                            {"reasoning", "r"}}}}
        .dump();
}

} // namespace

// ---------------------------------------------------------------------------
// action protocol
// ---------------------------------------------------------------------------

TEST_CASE("action parsing enforces the protocol", "[agents]") {
    auto ok = agents::parse_action(finish_json("yes"));
    REQUIRE(ok.is_finish());
    REQUIRE(ok.answer() == "yes");

    REQUIRE_THROWS_WITH(agents::parse_action("not json"),
                        Catch::Matchers::ContainsSubstring("not valid JSON"));
    REQUIRE_THROWS_WITH(agents::parse_action(R"({"action":{"name":"fly"}})"),
                        Catch::Matchers::ContainsSubstring("unknown action"));
    REQUIRE_THROWS_WITH(agents::parse_action(finish_json("maybe")),
                        Catch::Matchers::ContainsSubstring("yes"));
    REQUIRE_THROWS_WITH(agents::parse_action(finish_json("yes", " ")),
                        Catch::Matchers::ContainsSubstring("reasons"));
    REQUIRE_THROWS_WITH(
        agents::parse_action(R"({"action":{"name":"get_scale_performances","args":{}}})"),
        Catch::Matchers::ContainsSubstring("digit_id"));
}

TEST_CASE("variant action sets are exactly as specified", "[agents]") {
    using A = agents::ActionName;
    auto r = agents::allowed_actions(agents::Variant::R);
    REQUIRE(r == std::set<A>{A::toggle_visitor_record, A::get_scale_performances, A::finish});
    auto d = agents::allowed_actions(agents::Variant::D);
    REQUIRE(d.count(A::previous_cases_display) == 1);
    REQUIRE(d.count(A::previous_cases_analysis) == 0);
    auto c = agents::allowed_actions(agents::Variant::C);
    REQUIRE(c.count(A::previous_cases_analysis) == 1);
    REQUIRE(c.count(A::previous_cases_display) == 0);
}

// ---------------------------------------------------------------------------
// run_angel
// ---------------------------------------------------------------------------

TEST_CASE("scripted record-scales-finish run yields a 3-step transcript", "[agents]") {
    auto& f = fixture();
    const auto& mood_case = f.case_by_id("1001");
    llm::ScriptedProvider provider;
    provider.add_rule({{"Begin the diagnosis"}, action_json("toggle_visitor_record", "1001"), 1});
    provider.add_rule({{"Begin the diagnosis"}, action_json("get_scale_performances", "1001"), 1});
    provider.add_rule({{"Begin the diagnosis"}, finish_json("yes")});

    auto diag = agents::run_angel(agents::Variant::R, mood_case, f.context(), provider);
    REQUIRE(!diag.failed);
    REQUIRE(diag.answer);
    REQUIRE(diag.transcript.size() == 3);
    REQUIRE(diag.transcript.back().first.is_finish());
    // the record observation carries the matched criteria
    REQUIRE_THAT(diag.transcript[0].second,
                 Catch::Matchers::ContainsSubstring("Top matched diagnostic criteria"));
    REQUIRE_THAT(diag.transcript[1].second,
                 Catch::Matchers::ContainsSubstring("Depression-related performances"));
}

TEST_CASE("disallowed actions are rejected once then fail the run", "[agents]") {
    auto& f = fixture();
    const auto& rec = f.case_by_id("1001");

    SECTION("rejection then finish succeeds with the rejection logged") {
        llm::ScriptedProvider provider;
        provider.add_rule({{"Begin the diagnosis"}, action_json("previous_cases_display", "1001"), 1});
        provider.add_rule({{"Begin the diagnosis"}, finish_json("no")});
        auto diag = agents::run_angel(agents::Variant::R, rec, f.context(), provider);
        REQUIRE(!diag.failed);
        REQUIRE(diag.transcript.size() == 2);
        REQUIRE_THAT(diag.transcript[0].second,
                     Catch::Matchers::ContainsSubstring("not available for this agent"));
    }

    SECTION("repeating the disallowed action fails the run") {
        llm::ScriptedProvider provider;
        provider.add_rule({{"Begin the diagnosis"}, action_json("previous_cases_display", "1001")});
        auto diag = agents::run_angel(agents::Variant::R, rec, f.context(), provider);
        REQUIRE(diag.failed);
        REQUIRE_THAT(diag.failure, Catch::Matchers::ContainsSubstring("disallowed"));
    }
}

TEST_CASE("toggling the record of a recordless visitor is an observation, not an error",
          "[agents]") {
    auto& f = fixture();
    const auto& normal_case = f.case_by_id("1009");
    REQUIRE(!normal_case.has_record());
    llm::ScriptedProvider provider;
    provider.add_rule({{"Begin the diagnosis"}, action_json("toggle_visitor_record", "1009"), 1});
    provider.add_rule({{"Begin the diagnosis"}, finish_json("no")});
    auto diag = agents::run_angel(agents::Variant::R, normal_case, f.context(), provider);
    REQUIRE(!diag.failed);
    REQUIRE_THAT(diag.transcript[0].second,
                 Catch::Matchers::ContainsSubstring("no medical record available"));
}

TEST_CASE("an unparseable action gets one repair re-prompt", "[agents]") {
    auto& f = fixture();
    const auto& rec = f.case_by_id("1009");

    SECTION("repair succeeds") {
        llm::ScriptedProvider provider;
        provider.add_rule({{"Begin the diagnosis"}, "garbled output", 1});
        provider.add_rule({{"could not be parsed"}, finish_json("no")});
        auto diag = agents::run_angel(agents::Variant::R, rec, f.context(), provider);
        REQUIRE(!diag.failed);
        REQUIRE(provider.calls() == 2);
    }

    SECTION("second parse failure fails the run") {
        llm::ScriptedProvider provider;
        provider.add_rule({{"Begin the diagnosis"}, "garbled output"});
        auto diag = agents::run_angel(agents::Variant::R, rec, f.context(), provider);
        REQUIRE(diag.failed);
        REQUIRE_THAT(diag.failure, Catch::Matchers::ContainsSubstring("unparseable"));
    }
}

TEST_CASE("the step cap fails the run with the transcript retained", "[agents]") {
    auto& f = fixture();
    const auto& rec = f.case_by_id("1001");
    llm::ScriptedProvider provider;
    provider.add_rule({{"Begin the diagnosis"}, action_json("get_scale_performances", "1001")});
    agents::RunLimits limits;
    limits.step_cap = 4;
    auto diag = agents::run_angel(agents::Variant::R, rec, f.context(), provider, limits);
    REQUIRE(diag.failed);
    REQUIRE_THAT(diag.failure, Catch::Matchers::ContainsSubstring("step cap"));
    REQUIRE(diag.transcript.size() == 4);
}

TEST_CASE("playbook drives all variants over the full fixture deterministically", "[agents]") {
    auto& f = fixture();
    auto provider = playbook::make_provider();
    auto ctx = f.context(&provider);
    for (auto variant : {agents::Variant::R, agents::Variant::D, agents::Variant::C}) {
        for (const auto& rec : f.cases) {
            auto a = agents::run_angel(variant, rec, ctx, provider);
            REQUIRE(!a.failed);
            REQUIRE(a.transcript.back().first.is_finish());
            REQUIRE(!a.reasons.empty());
            for (const auto& [action, obs] : a.transcript)
                REQUIRE(agents::allowed_actions(variant).count(action.name) == 1);
            // tool purity: a second identical run yields identical bytes
            auto b = agents::run_angel(variant, rec, ctx, provider);
            REQUIRE(a.to_json().dump() == b.to_json().dump());
        }
    }
}

TEST_CASE("record/scale conflicts are flagged for clinicians", "[agents]") {
    auto& f = fixture();
    const auto& remission = f.case_by_id("1008"); // record positive, clinician scales all minimal
    auto provider = playbook::make_provider();
    auto diag = agents::run_angel(agents::Variant::R, remission, f.context(), provider);
    REQUIRE(!diag.failed);
    REQUIRE(diag.flags.count("record_scale_conflict") == 1);

    const auto& florid = f.case_by_id("1001");
    auto diag2 = agents::run_angel(agents::Variant::R, florid, f.context(), provider);
    REQUIRE(diag2.flags.count("record_scale_conflict") == 0);
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

TEST_CASE("baseline parses the one-shot JSON answer", "[agents]") {
    auto& f = fixture();
    llm::ScriptedProvider provider;
    provider.add_rule({{"\"diagnosis\""}, R"({"diagnosis":"yes","reasons":"elevated totals"})"});
    auto diag = agents::run_baseline(f.case_by_id("1001"), f.catalog, provider);
    REQUIRE(!diag.failed);
    REQUIRE(diag.answer);
    REQUIRE(diag.reasons == "elevated totals");
}

TEST_CASE("baseline prompt omits scales without recorded totals", "[agents]") {
    auto& f = fixture();
    auto prompt = agents::build_baseline_prompt(f.case_by_id("1009"), f.catalog);
    // normal cases carry no DAS or GAD-7 totals in this fixture beyond the listed set
    REQUIRE_THAT(prompt, Catch::Matchers::ContainsSubstring("no medical record available"));
    REQUIRE(!contains(prompt, "DAS total score"));
    REQUIRE_THAT(prompt, Catch::Matchers::ContainsSubstring("PHQ-9 total score"));
}

TEST_CASE("baseline prompt is byte-identical across runs and matches the golden file", "[agents]") {
    auto& f = fixture();
    auto a = agents::build_baseline_prompt(f.case_by_id("1001"), f.catalog);
    auto b = agents::build_baseline_prompt(f.case_by_id("1001"), f.catalog);
    REQUIRE(a == b);
    auto golden = read_file(fixture_path("golden_baseline_prompt.txt"));
    REQUIRE(a == golden);
}

TEST_CASE("unparseable baseline output fails after one repair", "[agents]") {
    auto& f = fixture();
    llm::ScriptedProvider provider;
    provider.add_rule({{"\"diagnosis\""}, "I think yes"});
    auto diag = agents::run_baseline(f.case_by_id("1001"), f.catalog, provider);
    REQUIRE(diag.failed);
    REQUIRE(provider.calls() == 2);
}
