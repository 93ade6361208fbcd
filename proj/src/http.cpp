#include <chrono>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gdesigner/agents.hpp"
#include "gdesigner/errors.hpp"
#include "gdesigner/text.hpp"

namespace gdesigner {

namespace {

using nlohmann::json;

struct SplitUrl {
    std::string host_part; // scheme://host:port
    std::string path_prefix;
};

SplitUrl split_base_url(const std::string& base_url) {
    SplitUrl out;
    const std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("http backend: base_url must include a scheme: " + base_url);
    const std::size_t path = base_url.find('/', scheme + 3);
    if (path == std::string::npos) {
        out.host_part = base_url;
    } else {
        out.host_part = base_url.substr(0, path);
        out.path_prefix = base_url.substr(path);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/')
            out.path_prefix.pop_back();
    }
    return out;
}

std::string bearer_token(const std::string& env_name) {
    const char* v = std::getenv(env_name.c_str());
    return v ? std::string(v) : std::string();
}

class JsonEndpoint {
public:
    explicit JsonEndpoint(const HttpClientConfig& cfg)
        : cfg_(cfg),
          url_(split_base_url(cfg.base_url)),
          gate_(cfg.max_in_flight > 0 ? cfg.max_in_flight : 1) {}

    // POST with bounded retry on transport failures and 429/5xx. Each request
    // gets its own connection so callers may dispatch concurrently up to the
    // in-flight cap.
    json post(const std::string& path, const json& body) {
        gate_.acquire();
        struct Release {
            std::counting_semaphore<>& g;
            ~Release() { g.release(); }
        } release{gate_};

        const std::string full_path = url_.path_prefix + path;
        const std::string payload = body.dump();
        const std::string token = bearer_token(cfg_.api_key_env);
        double backoff = cfg_.backoff_start_s;
        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2.0;
            }
            httplib::Client client(url_.host_part);
            client.set_connection_timeout(cfg_.timeout_s, 0);
            client.set_read_timeout(cfg_.timeout_s, 0);
            if (!token.empty()) client.set_bearer_token_auth(token);

            httplib::Result res = client.Post(full_path, payload, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "retryable status " + std::to_string(res->status);
                continue;
            }
            if (res->status < 200 || res->status >= 300)
                throw ProtocolError("http backend: status " + std::to_string(res->status) +
                                        " from " + full_path,
                                    res->status);
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw ProtocolError("http backend: response body is not valid JSON");
            return parsed;
        }
        throw TransportError("http backend: retries exhausted for " + full_path + " (" +
                             last_error + ")");
    }

    const HttpClientConfig& config() const { return cfg_; }

private:
    HttpClientConfig cfg_;
    SplitUrl url_;
    std::counting_semaphore<> gate_;
};

} // namespace

struct HttpChatBackend::Impl {
    explicit Impl(const HttpClientConfig& cfg) : endpoint(cfg) {}
    JsonEndpoint endpoint;
};

HttpChatBackend::HttpChatBackend(HttpClientConfig config)
    : impl_(std::make_unique<Impl>(config)) {}

HttpChatBackend::~HttpChatBackend() = default;

AgentResponse HttpChatBackend::respond(const AgentSpec& agent, const Prompt& prompt,
                                       Rng& /*rng*/) {
    json body = {
        {"model", impl_->endpoint.config().model},
        {"messages",
         json::array({json{{"role", "system"}, {"content", prompt.system}},
                      json{{"role", "user"}, {"content", prompt.user}}})},
        {"temperature", impl_->endpoint.config().temperature},
    };
    const json reply = impl_->endpoint.post("/chat/completions", body);

    AgentResponse r;
    r.agent_id = agent.id;
    try {
        r.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("http backend: malformed chat response: ") +
                            e.what());
    }
    if (reply.contains("usage")) {
        const auto& usage = reply["usage"];
        r.prompt_tokens = usage.value("prompt_tokens", 0);
        r.completion_tokens = usage.value("completion_tokens", 0);
    } else {
        r.prompt_tokens = whitespace_token_count(prompt.system) +
                          whitespace_token_count(prompt.user);
        r.completion_tokens = whitespace_token_count(r.text);
    }
    return r;
}

struct HttpEmbedder::Impl {
    explicit Impl(const HttpClientConfig& cfg) : endpoint(cfg) {}
    JsonEndpoint endpoint;
};

HttpEmbedder::HttpEmbedder(HttpClientConfig config, std::size_t dim)
    : impl_(std::make_unique<Impl>(config)), dim_(dim) {
    if (dim_ == 0) throw ConfigError("HttpEmbedder: dim must be positive");
}

HttpEmbedder::~HttpEmbedder() = default;

EmbeddingVector HttpEmbedder::embed(const std::string& text) {
    json body = {{"model", impl_->endpoint.config().model}, {"input", text}};
    const json reply = impl_->endpoint.post("/embeddings", body);

    EmbeddingVector v;
    try {
        v.values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("http embedder: malformed response: ") + e.what());
    }
    if (v.values.size() != dim_)
        throw ProtocolError("http embedder: expected dimension " + std::to_string(dim_) +
                            ", got " + std::to_string(v.values.size()));
    const double n = v.norm();
    if (n <= 0.0 || !std::isfinite(n))
        throw ProtocolError("http embedder: degenerate embedding norm");
    for (double& x : v.values) x /= n;
    return v;
}

} // namespace gdesigner
