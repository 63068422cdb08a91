#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "moodangels/provider.hpp"
#include "moodangels/retrieval.hpp"
#include "moodangels/util.hpp"

// Chat-completions and embeddings clients over HTTP. Endpoint and key come
// from MOODANGELS_API_BASE / MOODANGELS_API_KEY unless passed explicitly.

namespace moodangels::llm {

namespace detail {

struct Endpoint {
    std::string host; // scheme://host[:port]
    std::string path_prefix;
};

inline Endpoint parse_base(const std::string& base) {
    auto rest = base;
    std::string scheme = "http://";
    if (rest.rfind("https://", 0) == 0) {
        scheme = "https://";
        rest = rest.substr(8);
    } else if (rest.rfind("http://", 0) == 0) {
        rest = rest.substr(7);
    }
    auto slash = rest.find('/');
    Endpoint ep;
    if (slash == std::string::npos) {
        ep.host = scheme + rest;
    } else {
        ep.host = scheme + rest.substr(0, slash);
        ep.path_prefix = rest.substr(slash);
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    return ep;
}

inline std::string env_or(const char* name, const std::string& fallback) {
    if (const char* v = std::getenv(name)) return v;
    return fallback;
}

} // namespace detail

class HttpChatProvider : public Provider {
public:
    explicit HttpChatProvider(std::string base = detail::env_or("MOODANGELS_API_BASE", ""),
                              std::string api_key = detail::env_or("MOODANGELS_API_KEY", ""),
                              int timeout_seconds = 120)
        : base_(std::move(base)), api_key_(std::move(api_key)), timeout_(timeout_seconds) {
        if (base_.empty())
            throw Error("http provider: endpoint missing (set MOODANGELS_API_BASE)");
    }

    std::string id() const override { return "http:" + base_; }

    std::string complete(const ProviderRequest& req) override {
        auto ep = detail::parse_base(base_);
        httplib::Client cli(ep.host);
        cli.set_read_timeout(timeout_, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        json msgs = json::array();
        for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        json body{{"model", req.model}, {"messages", msgs}};
        for (const auto& [k, v] : req.params.items()) body[k] = v;

        auto res = cli.Post(ep.path_prefix + "/chat/completions", headers, body.dump(),
                            "application/json");
        if (!res)
            throw Error("http provider: request failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error("http provider: status " + std::to_string(res->status) + ": " + res->body);
        auto j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    }

private:
    std::string base_;
    std::string api_key_;
    int timeout_;
};

class HttpEmbedder : public retrieval::Embedder {
public:
    HttpEmbedder(std::string model, size_t dimension,
                 std::string base = detail::env_or("MOODANGELS_API_BASE", ""),
                 std::string api_key = detail::env_or("MOODANGELS_API_KEY", ""))
        : model_(std::move(model)), dim_(dimension), base_(std::move(base)),
          api_key_(std::move(api_key)) {
        if (base_.empty())
            throw Error("http embedder: endpoint missing (set MOODANGELS_API_BASE)");
    }

    std::string id() const override { return "http-embed:" + model_; }
    size_t dimension() const override { return dim_; }

    retrieval::Embedding embed(const std::string& text) override {
        if (trim(text).empty()) throw Error("embed: empty text");
        auto ep = detail::parse_base(base_);
        httplib::Client cli(ep.host);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        json body{{"model", model_}, {"input", text}};
        auto res = cli.Post(ep.path_prefix + "/embeddings", headers, body.dump(), "application/json");
        if (!res)
            throw Error("http embedder: request failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error("http embedder: status " + std::to_string(res->status) + ": " + res->body);
        auto j = json::parse(res->body);
        retrieval::Embedding e;
        e.v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
        if (e.v.size() != dim_)
            throw Error("http embedder: provider returned dimension " + std::to_string(e.v.size()) +
                        ", expected " + std::to_string(dim_));
        e.normalize();
        return e;
    }

private:
    std::string model_;
    size_t dim_;
    std::string base_;
    std::string api_key_;
};

} // namespace moodangels::llm
