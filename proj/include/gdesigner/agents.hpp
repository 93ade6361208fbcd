#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gdesigner/matrix.hpp"
#include "gdesigner/rng.hpp"

namespace gdesigner {

/// One agent of the system: identity, role, rolling memory, plugin descriptors.
struct AgentSpec {
    std::size_t id = 0;
    std::string base_descriptor;
    std::string role;
    std::vector<std::string> state;
    std::vector<std::string> plugins;
};

struct Prompt {
    std::string system;
    std::string user;
};

struct AgentResponse {
    std::size_t agent_id = 0;
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim() const { return values.size(); }
    double norm() const;
};

/// Replaces the target agent's system prompt wholesale.
struct AttackSpec {
    std::size_t target_agent = 0;
    std::string adversarial_system_prompt;
};

class AgentBackend {
public:
    virtual ~AgentBackend() = default;
    virtual AgentResponse respond(const AgentSpec& agent, const Prompt& prompt,
                                  Rng& rng) = 0;
    virtual std::string name() const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dim() const = 0;
};

struct MockAgentSkill {
    std::size_t agent_id = 0;
    std::string category;
    double p = 1.0;
};

/// Behavior knobs of the deterministic simulator. steps_per_turn bounds how
/// many arithmetic reductions one call performs, which is what forces
/// multi-step expressions to be relayed across agents.
struct MockBackendConfig {
    std::uint64_t seed = 1;
    int steps_per_turn = 1;
    double default_skill = 1.0;
    std::map<std::string, double> category_skill;
    std::vector<MockAgentSkill> agent_skill;
    std::map<std::size_t, bool> adoptive; // default true when absent
};

/// Deterministic agent simulator. The response is a pure function of
/// (AgentSpec, Prompt, config seed): all randomness is re-derived from a hash
/// of those, so repeated invocation is byte-identical and concurrent calls are
/// safe. A system prompt that no longer contains the agent's own role is
/// treated as hijacked and triggers the corruption rule (numeric answers +1,
/// choice answers rotated one option).
class MockBackend : public AgentBackend {
public:
    explicit MockBackend(MockBackendConfig config = {});
    AgentResponse respond(const AgentSpec& agent, const Prompt& prompt,
                          Rng& rng) override;
    std::string name() const override { return "mock"; }

    double skill_for(std::size_t agent_id, const std::string& category) const;
    bool is_adoptive(std::size_t agent_id) const;

private:
    MockBackendConfig config_;
};

/// Feature hashing of character 3-grams into dim buckets, signed by a second
/// hash, then L2-normalized. Empty text maps to the canonical basis vector e1.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 384);
    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
};

struct HttpClientConfig {
    std::string base_url;
    std::string model;
    double temperature = 1.0;
    std::string api_key_env = "GDESIGNER_API_KEY";
    int max_retries = 3;           // retries after the first attempt
    double backoff_start_s = 0.5;  // 0.5s, 1s, 2s
    int timeout_s = 30;
    int max_in_flight = 4;
};

/// OpenAI-compatible chat-completions client with bounded retry.
class HttpChatBackend : public AgentBackend {
public:
    explicit HttpChatBackend(HttpClientConfig config);
    ~HttpChatBackend() override;
    AgentResponse respond(const AgentSpec& agent, const Prompt& prompt,
                          Rng& rng) override;
    std::string name() const override { return "http"; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// OpenAI-compatible embeddings client; re-normalizes and length-checks.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpClientConfig config, std::size_t dim);
    ~HttpEmbedder() override;
    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return dim_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::size_t dim_;
};

/// Embedding of base-descriptor, role and plugin texts joined by newlines.
EmbeddingVector encode_agent(const AgentSpec& agent, Embedder& provider);

/// The access code the relay-task specialist reports for a codename. Shared
/// between the simulator and the synthetic task generator so both sides agree.
std::uint64_t relay_code_for(const std::string& codename);

} // namespace gdesigner
