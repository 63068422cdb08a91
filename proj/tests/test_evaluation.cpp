#include <catch2/catch_amalgamated.hpp>

#include <moodangels/evaluation.hpp>
#include <moodangels/playbook.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace moodangels;
using corpus::LabeledPrediction;
using evaluation::ConfusionCounts;
using test_helpers::data_path;
using test_helpers::fixture_path;

// ---------------------------------------------------------------------------
// metric formulas
// ---------------------------------------------------------------------------

TEST_CASE("perfect predictions score 1 everywhere", "[evaluation]") {
    std::vector<LabeledPrediction> preds;
    for (int i = 0; i < 10; ++i)
        preds.push_back({"c" + std::to_string(i), i % 2 == 0, "", i % 2 == 0});
    auto m = evaluation::metrics(preds);
    REQUIRE(m.recall == 1.0);
    REQUIRE(m.accuracy == 1.0);
    REQUIRE(m.mcc == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(m.macro_f1 == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("metrics match the worked example", "[evaluation]") {
    ConfusionCounts c{2, 1, 1, 6};
    auto m = evaluation::metrics(c);
    REQUIRE(m.accuracy == Catch::Approx(0.8).margin(1e-9));
    REQUIRE(m.recall == Catch::Approx(0.666667).margin(1e-6));
    REQUIRE(m.mcc == Catch::Approx(0.523810).margin(1e-6));
    REQUIRE(m.macro_f1 == Catch::Approx(0.761905).margin(1e-6));
}

TEST_CASE("all-negative predictions set the degenerate flag", "[evaluation]") {
    std::vector<LabeledPrediction> preds = {
        {"a", false, "", true}, {"b", false, "", false}, {"c", false, "", true}};
    auto m = evaluation::metrics(preds);
    REQUIRE(m.recall == 0.0);
    REQUIRE(m.mcc == 0.0);
    REQUIRE(m.degenerate_mcc);
}

namespace {

// independent oracle: direct confusion counting and textbook formulas
struct Oracle {
    double recall, accuracy, mcc, macro_f1;

    static Oracle from(const std::vector<LabeledPrediction>& preds) {
        long double tp = 0, fp = 0, fn = 0, tn = 0;
        for (const auto& p : preds) {
            if (p.gold && p.predicted) tp++;
            if (!p.gold && p.predicted) fp++;
            if (p.gold && !p.predicted) fn++;
            if (!p.gold && !p.predicted) tn++;
        }
        Oracle o{};
        long double n = tp + fp + fn + tn;
        o.recall = static_cast<double>(tp + fn > 0 ? tp / (tp + fn) : 0.0L);
        o.accuracy = static_cast<double>((tp + tn) / n);
        long double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
        o.mcc = d == 0 ? 0.0 : static_cast<double>((tp * tn - fp * fn) / sqrtl(d));
        long double p_pos = tp + fp > 0 ? tp / (tp + fp) : 0.0L;
        long double r_pos = tp + fn > 0 ? tp / (tp + fn) : 0.0L;
        long double f_pos = p_pos + r_pos > 0 ? 2 * p_pos * r_pos / (p_pos + r_pos) : 0.0L;
        long double p_neg = tn + fn > 0 ? tn / (tn + fn) : 0.0L;
        long double r_neg = tn + fp > 0 ? tn / (tn + fp) : 0.0L;
        long double f_neg = p_neg + r_neg > 0 ? 2 * p_neg * r_neg / (p_neg + r_neg) : 0.0L;
        o.macro_f1 = static_cast<double>((f_pos + f_neg) / 2);
        return o;
    }
};

} // namespace

TEST_CASE("metrics match a brute-force oracle on 1000 random sets", "[evaluation]") {
    Rng rng(1234);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + rng.below(60);
        std::vector<LabeledPrediction> preds;
        for (size_t i = 0; i < n; ++i)
            preds.push_back({"c", rng.uniform() < 0.5, "", rng.uniform() < 0.5});
        auto m = evaluation::metrics(preds);
        auto o = Oracle::from(preds);
        REQUIRE(m.recall == Catch::Approx(o.recall).margin(1e-12));
        REQUIRE(m.accuracy == Catch::Approx(o.accuracy).margin(1e-12));
        REQUIRE(m.mcc == Catch::Approx(o.mcc).margin(1e-12));
        REQUIRE(m.macro_f1 == Catch::Approx(o.macro_f1).margin(1e-12));
        REQUIRE(m.macro_f1 >= 0.0);
        REQUIRE(m.macro_f1 <= 1.0);
        REQUIRE(m.mcc >= -1.0);
        REQUIRE(m.mcc <= 1.0);
    }
}

TEST_CASE("|MCC| is invariant under simultaneous class relabeling", "[evaluation]") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 4 + rng.below(40);
        std::vector<LabeledPrediction> preds, flipped;
        for (size_t i = 0; i < n; ++i) {
            bool p = rng.uniform() < 0.5, g = rng.uniform() < 0.5;
            preds.push_back({"c", p, "", g});
            flipped.push_back({"c", !p, "", !g});
        }
        auto a = evaluation::metrics(preds);
        auto b = evaluation::metrics(flipped);
        REQUIRE(std::abs(a.mcc) == Catch::Approx(std::abs(b.mcc)).margin(1e-12));
        REQUIRE(a.accuracy == Catch::Approx(b.accuracy).margin(1e-12));
    }
}

// ---------------------------------------------------------------------------
// ablation settings
// ---------------------------------------------------------------------------

TEST_CASE("the four published settings map to their configurations", "[evaluation]") {
    using RF = agents::RecordFormat;
    using SM = agents::ScaleMode;
    auto s1 = evaluation::AblationSetting::get(1);
    REQUIRE(s1.record_format_matching == RF::unstructured);
    REQUIRE(s1.record_format_agent == RF::unstructured);
    REQUIRE(s1.scale_mode == SM::selected);
    auto s2 = evaluation::AblationSetting::get(2);
    REQUIRE(s2.record_format_matching == RF::structured);
    REQUIRE(s2.record_format_agent == RF::unstructured);
    auto s3 = evaluation::AblationSetting::get(3);
    REQUIRE(s3.record_format_matching == RF::structured);
    REQUIRE(s3.record_format_agent == RF::structured);
    auto s4 = evaluation::AblationSetting::get(4);
    REQUIRE(s4.scale_mode == SM::unselected_totals);
    REQUIRE_THROWS_AS(evaluation::AblationSetting::get(5), Error);
}

// ---------------------------------------------------------------------------
// run harness
// ---------------------------------------------------------------------------

namespace {

struct Fixture {
    scales::ScaleCatalog catalog;
    scales::SelectedItemSet selected;
    kb::KnowledgeBase knowledge;
    retrieval::FallbackEmbedder embedder;
    retrieval::VectorStore kb_store;
    retrieval::VectorStore record_store;
    retrieval::VectorStore scale_store;
    std::vector<corpus::CaseRecord> cases;

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

    agents::ToolContext context() {
        agents::ToolContext ctx;
        ctx.catalog = &catalog;
        ctx.selected = &selected;
        ctx.kb_store = &kb_store;
        ctx.record_store = &record_store;
        ctx.scale_store = &scale_store;
        ctx.embedder = &embedder;
        return ctx;
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

std::string finish_json(const std::string& answer) {
    return nlohmann::json{{"action", {{"name", "finish"},
                                      {"args", {{"answer", answer}, {"reasons", "scripted"}}}}},
                          {"thoughts", {}}}
        .dump();
}

} // namespace

TEST_CASE("a known answer script reproduces hand-computed metrics", "[evaluation]") {
    auto& f = fixture();
    // predict yes for the seven florid mood cases plus one other-disease case
    llm::ScriptedProvider provider;
    for (int id = 1001; id <= 1007; ++id)
        provider.add_rule({{"for visitor " + std::to_string(id) + "."}, finish_json("yes")});
    provider.add_rule({{"for visitor 1018."}, finish_json("yes")});
    provider.add_rule({{"Begin the diagnosis"}, finish_json("no")});

    evaluation::RunOptions opts;
    opts.method = evaluation::Method::angel_r;
    auto report = evaluation::evaluate_run(f.cases, f.context(), provider, opts);

    // tp=7 fn=1 fp=1 tn=11
    REQUIRE(report.scores.accuracy == Catch::Approx(18.0 / 20).margin(1e-9));
    REQUIRE(report.scores.recall == Catch::Approx(7.0 / 8).margin(1e-9));
    REQUIRE(report.scores.mcc == Catch::Approx(76.0 / 96).margin(1e-9));
    REQUIRE(report.scores.macro_f1 == Catch::Approx(0.5 * (7.0 / 8 + 11.0 / 12)).margin(1e-9));
    REQUIRE(report.evaluated == 20);
    REQUIRE(report.failures == 0);
    REQUIRE(report.audit_overlap.empty());
}

TEST_CASE("empty splits and missing gold labels are errors", "[evaluation]") {
    auto& f = fixture();
    llm::ScriptedProvider provider;
    evaluation::RunOptions opts;
    REQUIRE_THROWS_AS(evaluation::evaluate_run({}, f.context(), provider, opts), Error);

    auto cases = f.cases;
    cases[0].gold_label.reset();
    REQUIRE_THROWS_WITH(evaluation::evaluate_run(cases, f.context(), provider, opts),
                        Catch::Matchers::ContainsSubstring("gold label"));
}

TEST_CASE("identical scripted runs emit byte-identical reports", "[evaluation]") {
    auto& f = fixture();
    auto run = [&] {
        auto provider = playbook::make_provider();
        auto ctx = f.context();
        ctx.analysis_provider = &provider;
        evaluation::RunOptions opts;
        opts.method = evaluation::Method::angel_d;
        return evaluation::evaluate_run(f.cases, ctx, provider, opts).to_json().dump();
    };
    REQUIRE(run() == run());
}

TEST_CASE("failures are counted as wrong by default and excludable by flag", "[evaluation]") {
    auto& f = fixture();
    // visitor 1001 never produces valid JSON; everyone else finishes "no"
    auto make_provider = [] {
        llm::ScriptedProvider p;
        p.add_rule({{"for visitor 1001."}, "garbage"});
        p.add_rule({{"could not be parsed"}, "garbage"});
        p.add_rule({{"Begin the diagnosis"}, finish_json("no")});
        return p;
    };
    evaluation::RunOptions opts;
    opts.method = evaluation::Method::angel_r;

    auto p1 = make_provider();
    auto report = evaluation::evaluate_run(f.cases, f.context(), p1, opts);
    REQUIRE(report.failures == 1);
    REQUIRE(report.evaluated == 20);
    // 1001 is a mood case scored as a miss: tp=0 fn=8 tn=12
    REQUIRE(report.scores.recall == Catch::Approx(0.0).margin(1e-12));

    opts.count_failures_as_wrong = false;
    auto p2 = make_provider();
    auto excluded = evaluation::evaluate_run(f.cases, f.context(), p2, opts);
    REQUIRE(excluded.evaluated == 19);
}

TEST_CASE("the split audit reports test ids found in candidate stores", "[evaluation]") {
    auto& f = fixture();
    // build a store that wrongly contains a test case
    retrieval::VectorStore bad_store(f.embedder.dimension(), f.embedder.id());
    bad_store.add("1001", f.embedder.embed("leaked case text"), {{"text", "leaked"}});
    auto ctx = f.context();
    ctx.record_store = &bad_store;

    llm::ScriptedProvider provider;
    provider.add_rule({{"Begin the diagnosis"}, finish_json("no")});
    evaluation::RunOptions opts;
    opts.method = evaluation::Method::angel_r;
    auto report = evaluation::evaluate_run(f.cases, ctx, provider, opts);
    REQUIRE(report.audit_overlap == std::vector<std::string>{"1001"});
}

TEST_CASE("markdown report carries the metric row", "[evaluation]") {
    auto& f = fixture();
    llm::ScriptedProvider provider;
    provider.add_rule({{"Begin the diagnosis"}, finish_json("no")});
    evaluation::RunOptions opts;
    opts.method = evaluation::Method::angel_r;
    auto report = evaluation::evaluate_run(f.cases, f.context(), provider, opts);
    auto md = report.to_markdown();
    REQUIRE_THAT(md, Catch::Matchers::ContainsSubstring("| Model | Sensitivity | Accuracy |"));
    REQUIRE_THAT(md, Catch::Matchers::ContainsSubstring("angel_r"));
}
