#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/corpus.hpp"
#include "moodangels/util.hpp"

namespace moodangels::llm {

using json = nlohmann::json;

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ProviderRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    json params = json::object();

    // Canonical serialized form; this is the cache key material.
    std::string payload() const {
        json msgs = json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        return json{{"model", model}, {"messages", msgs}, {"params", params}}.dump();
    }

    std::string concat_text() const {
        std::string out;
        for (const auto& m : messages) {
            out += m.content;
            out += "\n";
        }
        return out;
    }
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const ProviderRequest& req) = 0;
};

// Replay provider for offline runs and tests. Responses come from an ordered
// rule list matched against the conversation text; an optional playbook
// callback answers anything the rules do not cover.
class ScriptedProvider : public Provider {
public:
    struct Rule {
        std::vector<std::string> contains; // all substrings must appear
        std::string response;
        int remaining = -1; // -1 = unlimited uses
    };

    using Playbook = std::function<std::optional<std::string>(const ProviderRequest&)>;

    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<Rule> rules) : rules_(std::move(rules)) {}

    static ScriptedProvider from_file(const std::filesystem::path& path) {
        json doc = json::parse(read_file(path));
        std::vector<Rule> rules;
        for (const auto& r : doc.at("rules")) {
            Rule rule;
            for (const auto& c : r.at("contains")) rule.contains.push_back(c.get<std::string>());
            rule.response = r.at("response");
            rule.remaining = r.value("uses", -1);
            rules.push_back(std::move(rule));
        }
        return ScriptedProvider(std::move(rules));
    }

    void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
    void set_playbook(Playbook pb) { playbook_ = std::move(pb); }

    std::string id() const override { return "scripted"; }

    std::string complete(const ProviderRequest& req) override {
        std::lock_guard lock(*mu_); // rule use-counts mutate under concurrency
        ++calls_;
        auto text = req.concat_text();
        for (auto& rule : rules_) {
            if (rule.remaining == 0) continue;
            bool all = true;
            for (const auto& c : rule.contains)
                if (!contains(text, c)) { all = false; break; }
            if (all) {
                if (rule.remaining > 0) --rule.remaining;
                return rule.response;
            }
        }
        if (playbook_) {
            if (auto r = playbook_(req)) return *r;
        }
        throw Error("scripted provider has no response for this prompt (model=" + req.model + ")");
    }

    size_t calls() const { return calls_; }

private:
    std::vector<Rule> rules_;
    Playbook playbook_;
    size_t calls_ = 0;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>(); // keeps the type movable
};

// Cache wrapper honoring the corpus cache contract: identical requests never
// reach the inner provider twice.
class CachingProvider : public Provider {
public:
    CachingProvider(Provider& inner, corpus::ProviderCache& cache, int retries = 2)
        : inner_(inner), cache_(cache), retries_(retries) {}

    std::string id() const override { return inner_.id(); }

    std::string complete(const ProviderRequest& req) override {
        return cache_.lookup_or_call(inner_.id(), req.model, req.payload(),
                                     [&] { return inner_.complete(req); }, retries_);
    }

private:
    Provider& inner_;
    corpus::ProviderCache& cache_;
    int retries_;
};

// Counts completions without answering; used to assert zero network activity.
class FailingProvider : public Provider {
public:
    std::string id() const override { return "failing"; }
    std::string complete(const ProviderRequest&) override {
        ++calls_;
        throw Error("provider unavailable");
    }
    size_t calls() const { return calls_; }

private:
    size_t calls_ = 0;
};

} // namespace moodangels::llm
