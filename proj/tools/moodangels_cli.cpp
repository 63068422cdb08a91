// Command-line entry points for the diagnosis pipeline, the tabular
// synthesizer, and the synthetic-data evaluation suite.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <moodangels/corpus.hpp>
#include <moodangels/debate.hpp>
#include <moodangels/evaluation.hpp>
#include <moodangels/http.hpp>
#include <moodangels/kb.hpp>
#include <moodangels/playbook.hpp>
#include <moodangels/provider.hpp>
#include <moodangels/retrieval.hpp>
#include <moodangels/scales.hpp>
#include <moodangels/syneval.hpp>
#include <moodangels/synth.hpp>

#include <iostream>
#include <memory>

using namespace moodangels;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonPaths {
    std::string catalog = "data/scale_catalog.json";
    std::string correlations = "data/correlations_moodsyn.csv";
    std::string groups = "data/selection_groups.json";
    double fraction = 0.05;
    std::vector<std::string> manual = {"phq9_Q1", "phq9_Q2"};
};

void add_common(CLI::App* cmd, CommonPaths& p) {
    cmd->add_option("--catalog", p.catalog, "scale catalog JSON");
    cmd->add_option("--correlations", p.correlations, "correlation table CSV (item_id,r,p)");
    cmd->add_option("--groups", p.groups, "symptom grouping JSON");
    cmd->add_option("--fraction", p.fraction, "top-correlation fraction for item selection");
    cmd->add_option("--manual", p.manual, "manually included item ids");
}

struct ProviderConfig {
    std::string kind = "scripted"; // scripted | http
    std::string script;            // rule file for the scripted provider
    bool playbook = true;
    std::string model = "default";
    std::string cache_dir;
};

void add_provider(CLI::App* cmd, ProviderConfig& p) {
    cmd->add_option("--provider", p.kind, "provider: scripted or http")
        ->check(CLI::IsMember({"scripted", "http"}));
    cmd->add_option("--script", p.script, "rule file for the scripted provider");
    cmd->add_flag("!--no-playbook", p.playbook, "disable the scripted provider's built-in policy");
    cmd->add_option("--model", p.model, "model id sent to the provider");
    cmd->add_option("--cache", p.cache_dir,
                    "response cache directory (default: $MOODANGELS_CACHE or ./cache)");
}

struct BuiltProvider {
    std::unique_ptr<llm::Provider> raw;
    std::unique_ptr<corpus::ProviderCache> cache;
    std::unique_ptr<llm::CachingProvider> cached;

    llm::Provider& get() { return *cached; }
};

BuiltProvider build_provider(const ProviderConfig& cfg) {
    BuiltProvider out;
    if (cfg.kind == "http") {
        out.raw = std::make_unique<llm::HttpChatProvider>();
    } else {
        auto scripted = cfg.script.empty()
                            ? std::make_unique<llm::ScriptedProvider>()
                            : std::make_unique<llm::ScriptedProvider>(
                                  llm::ScriptedProvider::from_file(cfg.script));
        if (cfg.playbook) scripted->set_playbook(playbook::make());
        out.raw = std::move(scripted);
    }
    auto root = cfg.cache_dir.empty() ? corpus::ProviderCache::default_root()
                                      : std::filesystem::path(cfg.cache_dir);
    out.cache = std::make_unique<corpus::ProviderCache>(root);
    out.cached = std::make_unique<llm::CachingProvider>(*out.raw, *out.cache);
    return out;
}

scales::SelectedItemSet load_selection(const CommonPaths& p) {
    auto table = scales::CorrelationTable::load_csv(p.correlations);
    auto grouping = scales::GroupingConfig::load(p.groups);
    return scales::select_items(table, p.fraction, p.manual, grouping);
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_file(path, j.dump(1) + "\n");
    std::cout << "wrote " << path.string() << "\n";
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& cases_path, const std::string& format,
               const std::string& catalog_path, const std::string& out) {
    auto catalog = scales::ScaleCatalog::load(catalog_path);
    auto cases = corpus::load_cases(cases_path, format, &catalog);
    auto counts = corpus::count_labels(cases);
    std::cout << "loaded " << cases.size() << " cases: " << counts.normal << " normal, "
              << counts.mood << " mood disorder, " << counts.other << " other disease\n";
    if (!out.empty()) {
        corpus::save_cases_jsonl(out, cases);
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_select_items(const CommonPaths& paths, const std::string& out, bool use_abs) {
    auto table = scales::CorrelationTable::load_csv(paths.correlations);
    auto grouping = scales::GroupingConfig::load(paths.groups);
    auto sel = scales::select_items(table, paths.fraction, paths.manual, grouping, use_abs);
    std::cout << "selected " << sel.items.size() << " items at threshold " << sel.threshold << "\n";
    for (const auto& [grp, name] : scales::group_order())
        std::cout << "  " << name << ": " << sel.group_members(grp).size() << " items\n";
    if (!out.empty()) write_json(out, sel.to_json());
    return 0;
}

int cmd_build_kb(const std::string& kb_path, const std::string& out, const std::string& review_out) {
    auto knowledge = kb::KnowledgeBase::load(kb_path);
    std::cout << "knowledge base: " << knowledge.size() << " entries across "
              << knowledge.counts_by_class().size() << " classes\n";
    if (!knowledge.covers_mood_disorders()) {
        std::cerr << "error: mood-disorder classes are not both covered; refusing to emit a "
                     "diagnosis-ready store\n";
        return 2;
    }
    if (!out.empty()) {
        knowledge.save(out);
        std::cout << "wrote " << out << "\n";
    }
    if (!review_out.empty()) {
        write_file(review_out, knowledge.export_for_review());
        std::cout << "wrote " << review_out << "\n";
    }
    return 0;
}

int cmd_build_stores(const CommonPaths& paths, const std::string& cases_path,
                     const std::string& kb_path, const std::string& out_dir, bool structured) {
    auto catalog = scales::ScaleCatalog::load(paths.catalog);
    auto selection = load_selection(paths);
    auto knowledge = kb::KnowledgeBase::load(kb_path);
    retrieval::FallbackEmbedder embedder;
    auto cases = corpus::load_cases_jsonl(cases_path, &catalog);

    std::filesystem::create_directories(out_dir);
    auto kb_store = retrieval::build_kb_store(knowledge, embedder);
    kb_store.save(std::filesystem::path(out_dir) / "criteria.store");
    auto record_store = retrieval::build_record_store(cases, embedder, structured);
    record_store.save(std::filesystem::path(out_dir) / "records.store");
    auto scale_store = retrieval::build_scale_store(cases, embedder, selection, catalog);
    scale_store.save(std::filesystem::path(out_dir) / "scales.store");
    std::cout << "stores built under " << out_dir << ": criteria=" << kb_store.size()
              << " records=" << record_store.size() << " scales=" << scale_store.size() << "\n";
    return 0;
}

struct DiagnoseArgs {
    CommonPaths paths;
    ProviderConfig provider;
    std::string method = "angel_r";
    std::string cases_path;
    std::string kb_path = "fixtures/kb_fixture.json";
    std::string store_cases;
    int ablation = 1;
    int step_cap = 8;
    int max_rounds = 3;
    uint64_t seed = 1;
    size_t jobs = 1;
    bool exclude_failures = false;
    std::string run_id;
    std::string out_root = "runs";
};

int cmd_diagnose(const DiagnoseArgs& args) {
    auto catalog = scales::ScaleCatalog::load(args.paths.catalog);
    auto selection = load_selection(args.paths);
    auto knowledge = kb::KnowledgeBase::load(args.kb_path);
    retrieval::FallbackEmbedder embedder;
    auto kb_store = retrieval::build_kb_store(knowledge, embedder);

    auto method = evaluation::method_from(args.method);
    retrieval::VectorStore record_store, scale_store;
    bool need_stores = method == evaluation::Method::angel_d ||
                       method == evaluation::Method::angel_c || method == evaluation::Method::multi;
    if (need_stores) {
        if (args.store_cases.empty())
            throw Error("method " + args.method + " needs --store-cases (the retrieval split)");
        auto store_cases = corpus::load_cases_jsonl(args.store_cases, &catalog);
        auto setting = evaluation::AblationSetting::get(args.ablation);
        record_store = retrieval::build_record_store(
            store_cases, embedder,
            setting.record_format_matching == agents::RecordFormat::structured);
        scale_store = retrieval::build_scale_store(store_cases, embedder, selection, catalog);
    }

    auto cases = corpus::load_cases(args.cases_path,
                                    args.cases_path.ends_with(".csv") ? "csv" : "jsonl", &catalog);

    auto provider = build_provider(args.provider);
    agents::ToolContext ctx;
    ctx.catalog = &catalog;
    ctx.selected = &selection;
    ctx.kb_store = &kb_store;
    ctx.record_store = need_stores ? &record_store : nullptr;
    ctx.scale_store = need_stores ? &scale_store : nullptr;
    ctx.embedder = &embedder;
    ctx.analysis_provider = &provider.get();
    ctx.model = args.provider.model;

    evaluation::RunOptions opts;
    opts.method = method;
    opts.setting = evaluation::AblationSetting::get(args.ablation);
    opts.count_failures_as_wrong = !args.exclude_failures;
    opts.angel_limits.step_cap = args.step_cap;
    opts.angel_limits.model = args.provider.model;
    opts.debate_limits.max_rounds = args.max_rounds;
    opts.debate_limits.model = args.provider.model;
    opts.jobs = args.jobs;

    auto report = evaluation::evaluate_run(cases, ctx, provider.get(), opts);
    report.config["run"] = {{"version", kVersion},
                            {"method", args.method},
                            {"cases", args.cases_path},
                            {"kb", args.kb_path},
                            {"store_cases", args.store_cases},
                            {"provider", args.provider.kind},
                            {"model", args.provider.model},
                            {"embedder", embedder.id()},
                            {"seed", args.seed},
                            {"jobs", args.jobs},
                            {"step_cap", args.step_cap},
                            {"max_rounds", args.max_rounds},
                            {"fraction", args.paths.fraction},
                            {"manual", args.paths.manual}};
    report.cache_stats = {{"hits", provider.cache->hits()}, {"misses", provider.cache->misses()}};

    auto run_id = args.run_id.empty() ? args.method + "-s" + std::to_string(args.seed) : args.run_id;
    auto dir = std::filesystem::path(args.out_root) / run_id;
    std::filesystem::create_directories(dir);
    write_json(dir / "report.json", report.to_json());
    write_file(dir / "report.md", report.to_markdown());

    std::string transcripts;
    for (const auto& r : report.ledger) {
        transcripts += json{{"case_id", r.case_id}, {"transcript", r.transcript}}.dump() + "\n";
        if (method == evaluation::Method::multi && !r.transcript.is_null())
            write_file(dir / "debates" / (r.case_id + ".json"), r.transcript.dump(1) + "\n");
    }
    write_file(dir / "transcripts.jsonl", transcripts);

    std::cout << report.to_markdown() << "\n";
    std::cout << "cache: " << provider.cache->hits() << " hits, " << provider.cache->misses()
              << " misses\n";
    if (!report.audit_overlap.empty()) {
        std::cerr << "warning: test ids present in the retrieval stores: "
                  << join(report.audit_overlap, ", ") << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& report_path) {
    auto doc = json::parse(read_file(report_path));
    std::vector<corpus::LabeledPrediction> preds;
    for (const auto& c : doc.at("cases")) {
        if (c.value("failed", false) && !doc.value("count_failures_as_wrong", true)) continue;
        preds.push_back({c.at("case_id"), c.at("predicted") == "yes", "",
                         c.at("gold") == "mood_disorder"});
    }
    auto m = evaluation::metrics(preds);
    std::cout << "recomputed from " << preds.size() << " predictions:\n"
              << m.to_json().dump(1) << "\n";
    auto stored = doc.at("metrics");
    bool match = std::abs(m.accuracy - stored.at("accuracy").get<double>()) < 1e-12 &&
                 std::abs(m.mcc - stored.at("mcc").get<double>()) < 1e-12;
    std::cout << (match ? "metrics match the stored report\n"
                        : "metrics DIFFER from the stored report\n");
    return match ? 0 : 2;
}

struct SynthesizeArgs {
    std::string real_path;
    std::string schema_path = "data/moodsyn_schema.json";
    size_t n = 0;
    double ratio = -1;
    uint64_t seed = 1;
    std::string out;
    std::string json_out;
};

int cmd_synthesize(const SynthesizeArgs& args) {
    auto schema = synth::FeatureSchema::load(args.schema_path);
    auto real = synth::read_table_csv(args.real_path, schema);
    auto model = synth::fit(real, schema);
    size_t n = args.n ? args.n : real.n();
    double ratio = args.ratio >= 0 ? args.ratio : model.positive_ratio;
    auto raw = synth::sample(model, n, ratio, args.seed);
    synth::PostprocessReport rep;
    auto cooked = synth::postprocess(raw, schema, &rep);
    auto violations = synth::validate(cooked, schema);
    if (!violations.empty()) {
        std::cerr << "error: post-processed table still has " << violations.size()
                  << " violations\n";
        return 2;
    }
    synth::write_table_csv(args.out, cooked, schema);
    std::cout << "fit " << model.metadata().dump() << "\n";
    std::cout << "sampled " << rep.rows_in << " rows -> kept " << rep.rows_out << " ("
              << rep.rows_dropped << " dropped, " << rep.totals_raised << " totals raised)\n";
    std::cout << "wrote " << args.out << "\n";
    if (!args.json_out.empty()) write_json(args.json_out, synth::table_to_json(cooked));
    return 0;
}

struct SynevalArgs {
    std::string real_path, syn_path;
    std::string schema_path = "data/moodsyn_schema.json";
    std::string real_test;
    std::string classifier = "boosted_stumps";
    int folds = 5;
    uint64_t seed = 7;
    bool folded = false;
    std::string out;
};

int cmd_syneval(const SynevalArgs& args) {
    auto schema = synth::FeatureSchema::load(args.schema_path);
    auto real = synth::read_table_csv(args.real_path, schema);
    auto syn = synth::read_table_csv(args.syn_path, schema);
    synth::Table test;
    syneval::SuiteOptions opts;
    if (!args.real_test.empty()) {
        test = synth::read_table_csv(args.real_test, schema);
        opts.real_test = &test;
    }
    opts.mle_classifier = args.classifier == "logistic" ? syneval::Classifier::logistic
                                                        : syneval::Classifier::boosted_stumps;
    opts.detection_folds = args.folds;
    opts.detection_seed = args.seed;
    auto report = syneval::evaluate_suite(real, syn, schema, opts);

    auto j = report.to_json();
    j["config"] = {{"version", kVersion},
                   {"real", args.real_path},
                   {"syn", args.syn_path},
                   {"real_test", args.real_test},
                   {"classifier", args.classifier},
                   {"detection_folds", args.folds},
                   {"detection_seed", args.seed}};
    std::cout << report.to_markdown() << "\n";
    if (args.folded)
        std::cout << "folded detection score: " << report.detection_folded << "\n";
    if (!args.out.empty()) {
        write_json(args.out, j);
        write_file(std::filesystem::path(args.out).replace_extension(".md"), report.to_markdown());
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    auto doc = json::parse(read_file(std::filesystem::path(run_dir) / "report.json"));
    evaluation::RunReport rep;
    rep.method = doc.at("method");
    rep.scores.recall = doc["metrics"]["recall"];
    rep.scores.accuracy = doc["metrics"]["accuracy"];
    rep.scores.mcc = doc["metrics"]["mcc"];
    rep.scores.macro_f1 = doc["metrics"]["macro_f1"];
    rep.evaluated = doc.at("evaluated");
    rep.failures = doc.at("failures");
    rep.count_failures_as_wrong = doc.at("count_failures_as_wrong");
    rep.label_counts.normal = doc["labels"]["normal"];
    rep.label_counts.mood = doc["labels"]["mood_disorder"];
    rep.label_counts.other = doc["labels"]["other_disease"];
    std::cout << rep.to_markdown();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MoodAngels: retrieval-augmented multi-agent mood-disorder diagnosis, a "
                 "schema-constrained tabular synthesizer, and a synthetic-data fidelity suite"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and summarize a case file");
    std::string ingest_cases, ingest_format = "jsonl", ingest_catalog = "data/scale_catalog.json",
                ingest_out;
    ingest->add_option("cases", ingest_cases, "case file")->required();
    ingest->add_option("--format", ingest_format, "jsonl or csv")
        ->check(CLI::IsMember({"jsonl", "csv"}));
    ingest->add_option("--catalog", ingest_catalog, "scale catalog JSON");
    ingest->add_option("--out", ingest_out, "write normalized JSONL here");

    // select-items
    auto* select = app.add_subcommand("select-items", "run the top-fraction item selection");
    CommonPaths select_paths;
    add_common(select, select_paths);
    std::string select_out;
    bool select_abs = false;
    select->add_option("--out", select_out, "write the selected-set JSON here");
    select->add_flag("--abs", select_abs, "rank by |r| instead of signed r");

    // build-kb
    auto* buildkb = app.add_subcommand("build-kb", "validate a criteria store and export it");
    std::string kb_in = "fixtures/kb_fixture.json", kb_out, kb_review;
    buildkb->add_option("--kb", kb_in, "criteria store JSON");
    buildkb->add_option("--out", kb_out, "write the normalized store here");
    buildkb->add_option("--review", kb_review, "write the tab-separated review export here");

    // build-stores
    auto* stores = app.add_subcommand("build-stores", "embed the corpus and criteria into stores");
    CommonPaths stores_paths;
    add_common(stores, stores_paths);
    std::string stores_cases, stores_kb = "fixtures/kb_fixture.json", stores_out = "stores";
    bool stores_structured = true;
    stores->add_option("--cases", stores_cases, "retrieval-split case JSONL")->required();
    stores->add_option("--kb", stores_kb, "criteria store JSON");
    stores->add_option("--out-dir", stores_out, "output directory");
    stores->add_flag("!--unstructured", stores_structured,
                     "embed combined narratives instead of structured items");

    // diagnose / ablate
    DiagnoseArgs diag;
    auto* diagnose = app.add_subcommand("diagnose", "run a diagnosis method over a test split");
    add_common(diagnose, diag.paths);
    add_provider(diagnose, diag.provider);
    diagnose->add_option("--method", diag.method, "baseline|angel_r|angel_d|angel_c|multi")
        ->check(CLI::IsMember({"baseline", "angel_r", "angel_d", "angel_c", "multi"}));
    diagnose->add_option("--cases", diag.cases_path, "test split (jsonl or csv)")->required();
    diagnose->add_option("--kb", diag.kb_path, "criteria store JSON");
    diagnose->add_option("--store-cases", diag.store_cases, "retrieval split for case stores");
    diagnose->add_option("--ablation", diag.ablation, "ablation setting 1..4")
        ->check(CLI::Range(1, 4));
    diagnose->add_option("--step-cap", diag.step_cap, "agent step cap");
    diagnose->add_option("--max-rounds", diag.max_rounds, "debate round cap");
    diagnose->add_option("--seed", diag.seed, "run seed (recorded in the report)");
    diagnose->add_option("--jobs", diag.jobs, "concurrent case evaluations");
    diagnose->add_flag("--exclude-failures", diag.exclude_failures,
                       "exclude failed cases instead of counting them as wrong");
    diagnose->add_option("--run-id", diag.run_id, "run directory name under --out-root");
    diagnose->add_option("--out-root", diag.out_root, "root directory for run outputs");

    DiagnoseArgs abl;
    auto* ablate = app.add_subcommand("ablate", "diagnose under a numbered ablation setting");
    add_common(ablate, abl.paths);
    add_provider(ablate, abl.provider);
    ablate->add_option("--setting", abl.ablation, "ablation setting 1..4")
        ->required()
        ->check(CLI::Range(1, 4));
    ablate->add_option("--method", abl.method, "method to ablate");
    ablate->add_option("--cases", abl.cases_path, "test split")->required();
    ablate->add_option("--kb", abl.kb_path, "criteria store JSON");
    ablate->add_option("--store-cases", abl.store_cases, "retrieval split for case stores");
    ablate->add_option("--seed", abl.seed, "run seed");
    ablate->add_option("--jobs", abl.jobs, "concurrent case evaluations");
    ablate->add_option("--run-id", abl.run_id, "run directory name");
    ablate->add_option("--out-root", abl.out_root, "root directory for run outputs");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "recompute metrics from a run report");
    std::string eval_report;
    evaluate->add_option("report", eval_report, "path to report.json")->required();

    // synthesize
    SynthesizeArgs syn;
    auto* synthesize = app.add_subcommand("synthesize", "fit the copula model and sample a table");
    synthesize->add_option("--real", syn.real_path, "real table CSV")->required();
    synthesize->add_option("--schema", syn.schema_path, "feature schema JSON");
    synthesize->add_option("-n,--rows", syn.n, "rows to sample (default: same as real)");
    synthesize->add_option("--ratio", syn.ratio, "positive-label ratio (default: fit ratio)");
    synthesize->add_option("--seed", syn.seed, "sampling seed");
    synthesize->add_option("--out", syn.out, "output CSV")->required();
    synthesize->add_option("--json", syn.json_out, "also export rows as a JSON array");

    // syneval
    SynevalArgs fid;
    auto* syneval_cmd = app.add_subcommand("syneval", "run the five-dimension fidelity suite");
    syneval_cmd->add_option("real", fid.real_path, "real table CSV")->required();
    syneval_cmd->add_option("syn", fid.syn_path, "synthetic table CSV")->required();
    syneval_cmd->add_option("--schema", fid.schema_path, "feature schema JSON");
    syneval_cmd->add_option("--real-test", fid.real_test, "held-out real CSV (enables MLE + DCR)");
    syneval_cmd->add_option("--classifier", fid.classifier, "MLE classifier")
        ->check(CLI::IsMember({"logistic", "boosted_stumps"}));
    syneval_cmd->add_option("--folds", fid.folds, "detection CV folds");
    syneval_cmd->add_option("--seed", fid.seed, "detection seed");
    syneval_cmd->add_flag("--folded", fid.folded, "also print 1 - 2|auc - 0.5|");
    syneval_cmd->add_option("-o,--out", fid.out, "write the report JSON here");

    // report
    auto* report = app.add_subcommand("report", "render the markdown table for a stored run");
    std::string report_dir;
    report->add_option("run", report_dir, "run directory containing report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(ingest_cases, ingest_format, ingest_catalog, ingest_out);
        if (*select) return cmd_select_items(select_paths, select_out, select_abs);
        if (*buildkb) return cmd_build_kb(kb_in, kb_out, kb_review);
        if (*stores)
            return cmd_build_stores(stores_paths, stores_cases, stores_kb, stores_out,
                                    stores_structured);
        if (*diagnose) return cmd_diagnose(diag);
        if (*ablate) return cmd_diagnose(abl);
        if (*evaluate) return cmd_evaluate(eval_report);
        if (*synthesize) return cmd_synthesize(syn);
        if (*syneval_cmd) return cmd_syneval(fid);
        if (*report) return cmd_report(report_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
