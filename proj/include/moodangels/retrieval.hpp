#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/corpus.hpp"
#include "moodangels/kb.hpp"
#include "moodangels/provider.hpp"
#include "moodangels/records.hpp"
#include "moodangels/scales.hpp"
#include "moodangels/util.hpp"

namespace moodangels::retrieval {

using json = nlohmann::json;
using corpus::CaseRecord;

struct Embedding {
    std::vector<double> v;

    double norm() const {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    void normalize() {
        double n = norm();
        if (n == 0) throw Error("embedding: zero vector cannot be normalized");
        for (double& x : v) x /= n;
    }
};

inline double inner(const Embedding& a, const Embedding& b) {
    if (a.v.size() != b.v.size()) throw Error("embedding: dimension mismatch");
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual size_t dimension() const = 0;
    virtual Embedding embed(const std::string& text) = 0;
};

// Deterministic offline embedder: hashed token counts, L2-normalized.
// Always available, so every retrieval path is testable without a provider.
class FallbackEmbedder : public Embedder {
public:
    explicit FallbackEmbedder(size_t dim = 256) : dim_(dim) {}

    std::string id() const override { return "fallback-" + std::to_string(dim_); }
    size_t dimension() const override { return dim_; }

    Embedding embed(const std::string& text) override {
        if (trim(text).empty()) throw Error("embed: empty text");
        Embedding e;
        e.v.assign(dim_, 0.0);
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            e.v[fnv1a(token) % dim_] += 1.0;
            token.clear();
        };
        for (char c : lower(text)) {
            if (std::isalnum(static_cast<unsigned char>(c))) token += c;
            else flush();
        }
        flush();
        e.normalize();
        return e;
    }

private:
    static uint64_t fnv1a(const std::string& s) {
        uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    size_t dim_;
};

// Cache wrapper satisfying the corpus cache contract for embeddings.
class CachingEmbedder : public Embedder {
public:
    CachingEmbedder(Embedder& inner, corpus::ProviderCache& cache) : inner_(inner), cache_(cache) {}

    std::string id() const override { return inner_.id(); }
    size_t dimension() const override { return inner_.dimension(); }

    Embedding embed(const std::string& text) override {
        auto raw = cache_.lookup_or_call(inner_.id(), "embedding", text, [&] {
            auto e = inner_.embed(text);
            return json(e.v).dump();
        });
        Embedding e;
        e.v = json::parse(raw).get<std::vector<double>>();
        return e;
    }

private:
    Embedder& inner_;
    corpus::ProviderCache& cache_;
};

// ---------------------------------------------------------------------------
// Exhaustive-scan vector store
// ---------------------------------------------------------------------------

struct RetrievalHit {
    std::string target_id;
    double score = 0;
    json payload;
};

// Stores are small (a few thousand entries at most), so top-k is an exact
// exhaustive inner-product scan; ties break by insertion order.
class VectorStore {
public:
    VectorStore() = default;
    VectorStore(size_t dimension, std::string embedder_id)
        : dimension_(dimension), embedder_id_(std::move(embedder_id)) {}

    void add(const std::string& id, Embedding embedding, json payload) {
        if (embedding.v.size() != dimension_)
            throw Error("store: embedding dimension " + std::to_string(embedding.v.size()) +
                        " does not match store dimension " + std::to_string(dimension_));
        entries_.push_back({id, std::move(embedding), std::move(payload)});
    }

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    size_t dimension() const { return dimension_; }
    const std::string& embedder_id() const { return embedder_id_; }

    std::vector<RetrievalHit> topk(const Embedding& query, size_t k) const {
        if (entries_.empty()) throw Error("store: top-k query against an empty store");
        std::vector<size_t> idx(entries_.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<double> scores(entries_.size());
        for (size_t i = 0; i < entries_.size(); ++i) scores[i] = inner(query, entries_[i].embedding);
        size_t take = std::min(k, entries_.size());
        std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(take), idx.end(),
                          [&](size_t a, size_t b) {
                              if (scores[a] != scores[b]) return scores[a] > scores[b];
                              return a < b;
                          });
        std::vector<RetrievalHit> hits;
        for (size_t i = 0; i < take; ++i)
            hits.push_back({entries_[idx[i]].id, scores[idx[i]], entries_[idx[i]].payload});
        return hits;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& e : entries_) out.push_back(e.id);
        return out;
    }

    void save(const std::filesystem::path& path) const {
        std::string out = json{{"dimension", dimension_},
                               {"embedder_id", embedder_id_},
                               {"count", entries_.size()},
                               {"store_header", true}}
                              .dump() +
                          "\n";
        for (const auto& e : entries_)
            out += json{{"id", e.id}, {"vector", e.embedding.v}, {"payload", e.payload}}.dump() + "\n";
        write_file(path, out);
    }

    static VectorStore load(const std::filesystem::path& path, const std::string& expected_embedder = "") {
        std::ifstream in(path);
        if (!in) throw Error("cannot open store file: " + path.string());
        std::string line;
        if (!std::getline(in, line)) throw Error("store file is empty: " + path.string());
        json header = json::parse(line);
        if (!header.value("store_header", false))
            throw Error("store file missing header: " + path.string());
        VectorStore store(header.at("dimension"), header.at("embedder_id"));
        if (!expected_embedder.empty() && store.embedder_id_ != expected_embedder)
            throw Error("store embedder mismatch: file has " + store.embedder_id_ + ", expected " +
                        expected_embedder);
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line);
            if (j.value("store_header", false))
                throw Error("store file mixes embedder ids (second header found): " + path.string());
            Embedding e;
            e.v = j.at("vector").get<std::vector<double>>();
            store.add(j.at("id"), std::move(e), j.at("payload"));
        }
        return store;
    }

private:
    struct Entry {
        std::string id;
        Embedding embedding;
        json payload;
    };

    size_t dimension_ = 0;
    std::string embedder_id_;
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Symptom matching against the criteria store
// ---------------------------------------------------------------------------

inline VectorStore build_kb_store(const kb::KnowledgeBase& knowledge, Embedder& embedder) {
    VectorStore store(embedder.dimension(), embedder.id());
    for (const auto& e : knowledge.entries()) {
        store.add(e.entry_id, embedder.embed(e.text),
                  json{{"text", e.text},
                       {"disorder_class", e.disorder_class},
                       {"disorder_name", e.disorder_name},
                       {"kind", kb::to_string(e.kind)}});
    }
    return store;
}

struct SymptomMatches {
    std::vector<RetrievalHit> hits;
    bool differential = false; // hits span more than one disorder class
};

inline SymptomMatches match_symptoms(const std::string& record_text, const VectorStore& kb_store,
                                     Embedder& embedder, size_t k = 5) {
    if (trim(record_text).empty()) throw Error("match_symptoms: empty record text");
    if (kb_store.empty()) throw Error("match_symptoms: empty criteria store");
    SymptomMatches out;
    out.hits = kb_store.topk(embedder.embed(record_text), k);
    std::set<std::string> classes;
    for (const auto& h : out.hits) classes.insert(h.payload.at("disorder_class").get<std::string>());
    out.differential = classes.size() > 1;
    return out;
}

inline std::string format_symptom_matches(const SymptomMatches& m) {
    std::string out = "Top matched diagnostic criteria:\n";
    char buf[32];
    for (size_t i = 0; i < m.hits.size(); ++i) {
        const auto& h = m.hits[i];
        std::snprintf(buf, sizeof buf, "%.4f", h.score);
        out += std::to_string(i + 1) + ". [" + h.payload.at("disorder_class").get<std::string>() +
               "] " + h.payload.at("text").get<std::string>() + " (similarity " + buf + ")\n";
    }
    if (m.differential)
        out += "The matched criteria span multiple disorder classes. Consider differential "
               "diagnosis and systematically evaluate which condition fits best.\n";
    return out;
}

// ---------------------------------------------------------------------------
// Similar-case retrieval
// ---------------------------------------------------------------------------

inline VectorStore build_record_store(const std::vector<CaseRecord>& cases, Embedder& embedder,
                                      bool structured = true) {
    VectorStore store(embedder.dimension(), embedder.id());
    for (const auto& rec : cases) {
        if (!rec.has_record()) continue;
        std::string text = structured && !rec.structured_items.empty()
                               ? records::structured_text(rec)
                               : records::combine_key_elements(rec).text;
        json payload{{"case_id", rec.case_id}, {"text", text}};
        if (rec.gold_label)
            payload["mood_disorder"] = *rec.gold_label == corpus::GoldLabel::mood_disorder;
        store.add(rec.case_id, embedder.embed(text), std::move(payload));
    }
    return store;
}

inline VectorStore build_scale_store(const std::vector<CaseRecord>& cases, Embedder& embedder,
                                     const scales::SelectedItemSet& selected,
                                     const scales::ScaleCatalog& catalog) {
    VectorStore store(embedder.dimension(), embedder.id());
    for (const auto& rec : cases) {
        auto text = scales::render_performance(rec.scale_scores, selected, catalog);
        json payload{{"case_id", rec.case_id}, {"text", text}};
        if (rec.gold_label)
            payload["mood_disorder"] = *rec.gold_label == corpus::GoldLabel::mood_disorder;
        store.add(rec.case_id, embedder.embed(text), std::move(payload));
    }
    return store;
}

enum class RetrievalMode { display, analysis };

struct RetrievalResult {
    bool found = false;
    std::string text;
    std::vector<std::string> hit_ids;
};

namespace detail {

inline std::string render_hits(const std::vector<RetrievalHit>& hits) {
    std::string out;
    char buf[32];
    for (size_t i = 0; i < hits.size(); ++i) {
        const auto& h = hits[i];
        std::string verdict = "unknown";
        if (h.payload.contains("mood_disorder"))
            verdict = h.payload.at("mood_disorder").get<bool>() ? "yes" : "no";
        std::snprintf(buf, sizeof buf, "%.4f", h.score);
        out += std::to_string(i + 1) + ". Case " + h.target_id + " (mood disorder: " + verdict +
               ", similarity " + buf + "):\n" + h.payload.at("text").get<std::string>() + "\n";
    }
    return out;
}

inline RetrievalResult finish_retrieval(const std::vector<RetrievalHit>& hits, RetrievalMode mode,
                                        const std::string& query_text, llm::Provider* provider,
                                        const std::string& model) {
    RetrievalResult out;
    out.found = true;
    for (const auto& h : hits) out.hit_ids.push_back(h.target_id);
    auto rendered = render_hits(hits);
    if (mode == RetrievalMode::display) {
        out.text = "Retrieved similar cases (for reference only):\n" + rendered;
        return out;
    }
    if (!provider) throw Error("analysis retrieval mode requires a provider");
    llm::ProviderRequest req;
    req.model = model;
    req.messages.push_back(
        {"system",
         "You are a psychiatry diagnosis expert. Compare the current visitor with the retrieved "
         "cases: summarize the similarities and differences relevant to mood disorder, citing the "
         "retrieved case ids. Due to the personalized nature of psychiatric diagnosis, the "
         "retrieved cases are for reference only."});
    req.messages.push_back({"user", "Current visitor:\n" + query_text + "\nRetrieved cases:\n" + rendered});
    out.text = "Comparative analysis of retrieved cases:\n" + provider->complete(req);
    return out;
}

} // namespace detail

// First-visit clients may have no record: that is a structured "no record"
// result, not an error.
inline RetrievalResult retrieve_similar_records(const CaseRecord& query, const VectorStore& store,
                                                Embedder& embedder, size_t k = 5,
                                                RetrievalMode mode = RetrievalMode::display,
                                                llm::Provider* provider = nullptr,
                                                const std::string& model = "default",
                                                bool structured = true) {
    if (!query.has_record())
        return {false, "The visitor has no medical record available.", {}};
    if (store.empty()) throw Error("retrieve_similar_records: empty store");
    std::string text = structured && !query.structured_items.empty()
                           ? records::structured_text(query)
                           : records::combine_key_elements(query).text;
    auto hits = store.topk(embedder.embed(text), k);
    return detail::finish_retrieval(hits, mode, text, provider, model);
}

inline RetrievalResult retrieve_similar_scales(const CaseRecord& query, const VectorStore& store,
                                               Embedder& embedder,
                                               const scales::SelectedItemSet& selected,
                                               const scales::ScaleCatalog& catalog, size_t k = 5,
                                               RetrievalMode mode = RetrievalMode::display,
                                               llm::Provider* provider = nullptr,
                                               const std::string& model = "default") {
    if (store.empty()) throw Error("retrieve_similar_scales: empty store");
    auto text = scales::render_performance(query.scale_scores, selected, catalog);
    auto hits = store.topk(embedder.embed(text), k);
    return detail::finish_retrieval(hits, mode, text, provider, model);
}

} // namespace moodangels::retrieval
