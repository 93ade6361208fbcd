#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gdesigner/agents.hpp"
#include "gdesigner/designer.hpp"
#include "gdesigner/errors.hpp"

namespace gdesigner {

/// A topological order of the communication DAG. Every sender precedes all of
/// its receivers.
struct ExecutionPlan {
    std::vector<std::size_t> order;
};

enum class AggregationKind { MajorityVote, SummarizerAgent, LastAgent };

AggregationKind aggregation_kind_from_string(const std::string& name);
std::string to_string(AggregationKind kind);

struct AggregationStrategy {
    AggregationKind kind = AggregationKind::MajorityVote;
    // Present iff kind == SummarizerAgent: a non-graph agent that reads the
    // whole round and produces the answer.
    std::optional<AgentSpec> summarizer;
};

struct Transcript {
    std::vector<std::vector<AgentResponse>> rounds; // responses in sigma order
    std::vector<AgentResponse> aggregator_responses; // summarizer calls, if any
    std::vector<std::string> answers;               // one per round
    std::string final_answer;
    std::size_t total_prompt_tokens = 0;
    std::size_t total_completion_tokens = 0;
};

/// A round aborted; carries the responses that had committed before the
/// failing agent.
class RoundError : public ExecutionError {
public:
    RoundError(const std::string& msg, std::vector<AgentResponse> partial)
        : ExecutionError(msg), partial_responses(std::move(partial)) {}
    std::vector<AgentResponse> partial_responses;
};

/// A dialogue aborted mid-run; carries the completed rounds.
class DialogueError : public ExecutionError {
public:
    DialogueError(const std::string& msg, Transcript partial)
        : ExecutionError(msg), partial_transcript(std::move(partial)) {}
    Transcript partial_transcript;
};

/// Kahn's algorithm with the lowest-index-first tie break. Throws
/// InvariantError when the topology contains a cycle.
ExecutionPlan topo_order(const CommTopology& topology);

/// System prompt = role plus serialized memory (or the adversarial prompt
/// verbatim when the attack targets this agent); user prompt = query followed
/// by the upstream responses in execution order.
Prompt build_prompt(const AgentSpec& agent, const std::vector<AgentSpec>& roster,
                    const std::string& query,
                    const std::vector<AgentResponse>& upstream,
                    const std::optional<AttackSpec>& attack);

std::vector<AgentResponse> run_round(const CommTopology& topology,
                                     const std::vector<AgentSpec>& agents,
                                     AgentBackend& backend, const std::string& query,
                                     std::size_t round_index,
                                     const std::optional<AttackSpec>& attack, Rng& rng);

std::string aggregate(const std::vector<AgentResponse>& responses,
                      const AggregationStrategy& strategy, const ExecutionPlan& plan,
                      const std::vector<AgentSpec>& roster, const std::string& query,
                      AgentBackend* summarizer_backend, Rng& rng,
                      AgentResponse* summarizer_response = nullptr);

Transcript run_dialogue(const CommTopology& topology, std::vector<AgentSpec> agents,
                        AgentBackend& backend, const std::string& query,
                        std::size_t k_rounds, const AggregationStrategy& strategy,
                        const std::optional<AttackSpec>& attack, Rng& rng);

} // namespace gdesigner
