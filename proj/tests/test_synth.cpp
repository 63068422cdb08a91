#include <catch2/catch_amalgamated.hpp>

#include <moodangels/synth.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace moodangels;
using test_helpers::data_path;
using test_helpers::fixture_path;
using test_helpers::temp_dir;

static const synth::FeatureSchema& schema() {
    static auto s = synth::FeatureSchema::load(data_path("moodsyn_schema.json"));
    return s;
}

static const synth::Table& real_table() {
    static auto t = synth::read_table_csv(fixture_path("moodsyn_real.csv"), schema());
    return t;
}

TEST_CASE("schema loads the 25-column layout with 4 constraints", "[synth]") {
    const auto& s = schema();
    REQUIRE(s.columns.size() == 25);
    REQUIRE(s.columns.front().name == "HAMA Q4 Score");
    REQUIRE(s.columns.back().name == "Mood Disorder");
    REQUIRE(s.columns.back().label);
    REQUIRE(s.constraints.size() == 4);
    REQUIRE(s.feature_count() == 24);
}

TEST_CASE("the published example row passes post-processing unchanged", "[synth]") {
    synth::Table t;
    for (const auto& c : schema().columns) t.columns.push_back(c.name);
    t.rows.push_back({3, 3, 28, 18, 3, 2, 2, 0, 14, 2, 1, 1, 2, 1, 28, 3, 11, 29, 18, 122, 40, 11,
                      34, 5, 1});
    synth::PostprocessReport rep;
    auto out = synth::postprocess(t, schema(), &rep);
    REQUIRE(out.n() == 1);
    REQUIRE(out.rows[0] == t.rows[0]);
    REQUIRE(rep.totals_raised == 0);
    REQUIRE(synth::validate(out, schema()).empty());
}

TEST_CASE("a total below its question sum is raised when in range", "[synth]") {
    synth::Table t;
    for (const auto& c : schema().columns) t.columns.push_back(c.name);
    // PHQ9 questions 3+3+2+2 = 10 > total 7 -> total raised to 10 (max 27)
    t.rows.push_back({0, 0, 10, 5, 3, 3, 2, 2, 7, 0, 0, 0, 0, 0, 10, 0, 5, 20, 5, 60, 30, 2, 20, 3,
                      0});
    synth::PostprocessReport rep;
    auto out = synth::postprocess(t, schema(), &rep);
    REQUIRE(out.n() == 1);
    REQUIRE(out.rows[0][8] == 10.0);
    REQUIRE(rep.totals_raised == 1);
    REQUIRE(synth::validate(out, schema()).empty());
}

TEST_CASE("rows infeasible after repair are dropped and counted", "[synth]") {
    // custom schema where the question sum can exceed the total's maximum
    synth::FeatureSchema s;
    s.columns = {{"q1", 0, 8, true, false},
                 {"q2", 0, 8, true, false},
                 {"total", 0, 10, true, false},
                 {"label", 0, 1, true, true}};
    s.constraints = {{"q_le_total", {"q1", "q2"}, "total"}};
    synth::Table t;
    t.columns = {"q1", "q2", "total", "label"};
    t.rows.push_back({8, 8, 4, 0});  // sum 16 > max 10 -> drop
    t.rows.push_back({3, 3, 4, 1});  // repairable -> total 6
    synth::PostprocessReport rep;
    auto out = synth::postprocess(t, s, &rep);
    REQUIRE(out.n() == 1);
    REQUIRE(rep.rows_dropped == 1);
    REQUIRE(out.rows[0][2] == 6.0);
}

TEST_CASE("validate names the violated constraint or column", "[synth]") {
    synth::Table t;
    for (const auto& c : schema().columns) t.columns.push_back(c.name);
    t.rows.push_back({3, 3, 28, 18, 3, 2, 2, 0, 4, 2, 1, 1, 2, 1, 28, 3, 11, 29, 18, 122, 40, 11,
                      34, 5, 1}); // PHQ9 total 4 < question sum 7
    auto violations = synth::validate(t, schema());
    REQUIRE(violations.size() == 1);
    REQUIRE(violations[0].what == "phq9_questions_le_total");

    t.rows[0][8] = 99; // out of range
    violations = synth::validate(t, schema());
    REQUIRE(violations.size() == 1);
    REQUIRE(violations[0].what == "PHQ9 Total Score");
}

TEST_CASE("fit recovers the fixture class balance", "[synth]") {
    auto model = synth::fit(real_table(), schema());
    REQUIRE(model.classes.size() == 2);
    REQUIRE(model.classes.at(1).n == 687);
    REQUIRE(model.classes.at(0).n == 419);
    REQUIRE(model.positive_ratio == Catch::Approx(687.0 / 1106).margin(1e-12));
    REQUIRE(model.classes.at(1).marginals.size() == 24);
}

TEST_CASE("single-class or undersized inputs are fit errors", "[synth]") {
    synth::Table t;
    for (const auto& c : schema().columns) t.columns.push_back(c.name);
    for (int i = 0; i < 60; ++i)
        t.rows.push_back(real_table().rows[static_cast<size_t>(i)]); // all positive rows
    bool single_class = true;
    for (const auto& r : t.rows)
        if (r.back() != 1.0) single_class = false;
    REQUIRE(single_class);
    REQUIRE_THROWS_WITH(synth::fit(t, schema()), Catch::Matchers::ContainsSubstring("both label classes"));

    // add a handful of negatives: still below the per-class minimum
    for (int i = 0; i < 5; ++i) t.rows.push_back(real_table().rows[700 + static_cast<size_t>(i)]);
    REQUIRE_THROWS_WITH(synth::fit(t, schema()), Catch::Matchers::ContainsSubstring("need >="));
}

TEST_CASE("seeded sampling is reproducible and seed-sensitive", "[synth]") {
    auto model = synth::fit(real_table(), schema());
    auto one = synth::sample(model, 1, 42);
    auto two = synth::sample(model, 1, 42);
    REQUIRE(one.rows == two.rows);
    auto other = synth::sample(model, 1, 43);
    REQUIRE(one.rows != other.rows);

    auto dir = temp_dir("synth_bytes");
    auto a = synth::postprocess(synth::sample(model, 100, 7), schema());
    auto b = synth::postprocess(synth::sample(model, 100, 7), schema());
    synth::write_table_csv(dir / "a.csv", a, schema());
    synth::write_table_csv(dir / "b.csv", b, schema());
    REQUIRE(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
}

TEST_CASE("fit-sample closure keeps column means within 5 percent", "[synth]") {
    auto model = synth::fit(real_table(), schema());
    auto sampled = synth::postprocess(synth::sample(model, 5000, 11), schema());
    for (size_t j = 0; j < schema().feature_count(); ++j) {
        auto real_col = real_table().column(j);
        auto syn_col = sampled.column(j);
        double rm = stats::mean(real_col);
        double sm = stats::mean(syn_col);
        INFO(schema().columns[j].name);
        REQUIRE(std::abs(sm - rm) / std::max(1e-9, std::abs(rm)) < 0.05);
    }
}

TEST_CASE("sampled values stay inside schema ranges and pass validation", "[synth]") {
    auto model = synth::fit(real_table(), schema());
    auto sampled = synth::postprocess(synth::sample(model, 2000, 3), schema());
    REQUIRE(synth::validate(sampled, schema()).empty());
    double positives = 0;
    for (const auto& r : sampled.rows) positives += r.back();
    double ratio = positives / static_cast<double>(sampled.n());
    REQUIRE(std::abs(ratio - model.positive_ratio) < 0.05);
}

TEST_CASE("csv round-trip preserves the table", "[synth]") {
    auto dir = temp_dir("synth_csv");
    auto model = synth::fit(real_table(), schema());
    auto sampled = synth::postprocess(synth::sample(model, 50, 5), schema());
    synth::write_table_csv(dir / "t.csv", sampled, schema());
    auto again = synth::read_table_csv(dir / "t.csv", schema());
    REQUIRE(again.rows == sampled.rows);

    auto j = synth::table_to_json(sampled);
    REQUIRE(j.size() == 50);
    REQUIRE(j.at(0).contains("Mood Disorder"));
}

TEST_CASE("wrong csv headers are rejected", "[synth]") {
    auto dir = temp_dir("synth_headers");
    write_file(dir / "bad.csv", "A,B\n1,2\n");
    REQUIRE_THROWS_WITH(synth::read_table_csv(dir / "bad.csv", schema()),
                        Catch::Matchers::ContainsSubstring("expected 25 columns"));
}
