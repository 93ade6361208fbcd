#include "gdesigner/executor.hpp"

#include <algorithm>
#include <map>

#include "gdesigner/errors.hpp"
#include "gdesigner/text.hpp"

namespace gdesigner {

AggregationKind aggregation_kind_from_string(const std::string& name) {
    if (name == "majority_vote") return AggregationKind::MajorityVote;
    if (name == "summarizer_agent") return AggregationKind::SummarizerAgent;
    if (name == "last_agent") return AggregationKind::LastAgent;
    throw ConfigError("unknown aggregation kind: " + name);
}

std::string to_string(AggregationKind kind) {
    switch (kind) {
        case AggregationKind::MajorityVote: return "majority_vote";
        case AggregationKind::SummarizerAgent: return "summarizer_agent";
        case AggregationKind::LastAgent: return "last_agent";
    }
    return "?";
}

ExecutionPlan topo_order(const CommTopology& topology) {
    const std::size_t n = topology.n;
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& e : topology.edges) ++indegree[e.to];

    ExecutionPlan plan;
    std::vector<bool> placed(n, false);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!placed[i] && indegree[i] == 0) {
                pick = i;
                break;
            }
        }
        if (pick == n)
            throw InvariantError("topo_order: cycle in communication topology");
        placed[pick] = true;
        plan.order.push_back(pick);
        for (const auto& e : topology.edges)
            if (e.from == pick) --indegree[e.to];
    }
    return plan;
}

Prompt build_prompt(const AgentSpec& agent, const std::vector<AgentSpec>& roster,
                    const std::string& query,
                    const std::vector<AgentResponse>& upstream,
                    const std::optional<AttackSpec>& attack) {
    Prompt p;
    if (attack && attack->target_agent == agent.id) {
        p.system = attack->adversarial_system_prompt;
    } else {
        p.system = agent.role;
        for (const auto& entry : agent.state) p.system += "\n[mem] " + entry;
    }
    p.user = query;
    for (const auto& r : upstream) {
        std::string role = "?";
        for (const auto& a : roster)
            if (a.id == r.agent_id) role = a.role;
        p.user += "\nAgent " + std::to_string(r.agent_id) + " (" + role + "): " + r.text;
    }
    return p;
}

std::vector<AgentResponse> run_round(const CommTopology& topology,
                                     const std::vector<AgentSpec>& agents,
                                     AgentBackend& backend, const std::string& query,
                                     std::size_t round_index,
                                     const std::optional<AttackSpec>& attack, Rng& rng) {
    const ExecutionPlan plan = topo_order(topology);
    const std::size_t n = agents.size();
    if (topology.n != n) throw ConfigError("run_round: roster/topology size mismatch");

    std::vector<AgentResponse> by_agent(n);
    std::vector<bool> done(n, false);
    std::vector<std::string> errors(n);

    // Group the plan into ready levels; agents within a level have no edges
    // among themselves and may run concurrently. Responses commit in sigma
    // order afterwards, so transcripts do not depend on thread timing.
    std::vector<std::size_t> level_of(n, 0);
    for (std::size_t idx = 0; idx < plan.order.size(); ++idx) {
        const std::size_t node = plan.order[idx];
        std::size_t lvl = 0;
        for (std::size_t in : topology.in_neighbors(node))
            lvl = std::max(lvl, level_of[in] + 1);
        level_of[node] = lvl;
    }
    std::size_t max_level = 0;
    for (std::size_t i = 0; i < n; ++i) max_level = std::max(max_level, level_of[i]);

    for (std::size_t lvl = 0; lvl <= max_level; ++lvl) {
        std::vector<std::size_t> members;
        for (std::size_t node : plan.order)
            if (level_of[node] == lvl) members.push_back(node);

        const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(dynamic) if (count > 1)
        for (std::ptrdiff_t mi = 0; mi < count; ++mi) {
            const std::size_t node = members[static_cast<std::size_t>(mi)];
            std::vector<AgentResponse> upstream;
            for (std::size_t src : plan.order) {
                if (src == node) break;
                if (topology.has_edge(src, node)) upstream.push_back(by_agent[src]);
            }
            const Prompt prompt = build_prompt(agents[node], agents, query, upstream, attack);
            Rng call_rng = rng.child(round_index * 1000 + node);
            try {
                by_agent[node] = backend.respond(agents[node], prompt, call_rng);
                by_agent[node].agent_id = agents[node].id;
                done[node] = true;
            } catch (const std::exception& e) {
                errors[node] = e.what();
            }
        }
        for (std::size_t node : members) {
            if (!done[node]) {
                std::vector<AgentResponse> partial;
                for (std::size_t src : plan.order)
                    if (done[src]) partial.push_back(by_agent[src]);
                throw RoundError("round " + std::to_string(round_index) + ", agent " +
                                     std::to_string(node) + ": " + errors[node],
                                 std::move(partial));
            }
        }
    }

    std::vector<AgentResponse> in_sigma_order;
    in_sigma_order.reserve(n);
    for (std::size_t node : plan.order) in_sigma_order.push_back(by_agent[node]);
    return in_sigma_order;
}

std::string aggregate(const std::vector<AgentResponse>& responses,
                      const AggregationStrategy& strategy, const ExecutionPlan& plan,
                      const std::vector<AgentSpec>& roster, const std::string& query,
                      AgentBackend* summarizer_backend, Rng& rng,
                      AgentResponse* summarizer_response) {
    if (responses.empty()) throw ConfigError("aggregate: no responses");

    switch (strategy.kind) {
        case AggregationKind::LastAgent:
            return responses.back().text;

        case AggregationKind::MajorityVote: {
            // Responses arrive in sigma order; ties go to the earliest.
            std::vector<std::string> answers;
            answers.reserve(responses.size());
            for (const auto& r : responses) answers.push_back(normalize_answer(r.text));
            std::string best;
            std::size_t best_count = 0;
            for (std::size_t i = 0; i < answers.size(); ++i) {
                std::size_t count = 0;
                for (const auto& a : answers)
                    if (a == answers[i]) ++count;
                if (count > best_count) {
                    best_count = count;
                    best = answers[i];
                }
            }
            return best;
        }

        case AggregationKind::SummarizerAgent: {
            if (!strategy.summarizer || !summarizer_backend)
                throw ConfigError("aggregate: summarizer strategy without a summarizer");
            const Prompt prompt =
                build_prompt(*strategy.summarizer, roster, query, responses, std::nullopt);
            Rng call_rng = rng.child(999983);
            AgentResponse r =
                summarizer_backend->respond(*strategy.summarizer, prompt, call_rng);
            r.agent_id = strategy.summarizer->id;
            if (summarizer_response) *summarizer_response = r;
            return r.text;
        }
    }
    throw ConfigError("aggregate: unreachable");
}

Transcript run_dialogue(const CommTopology& topology, std::vector<AgentSpec> agents,
                        AgentBackend& backend, const std::string& query,
                        std::size_t k_rounds, const AggregationStrategy& strategy,
                        const std::optional<AttackSpec>& attack, Rng& rng) {
    if (k_rounds < 1) throw ConfigError("run_dialogue: k_rounds must be >= 1");
    if (attack && attack->target_agent >= agents.size())
        throw ConfigError("run_dialogue: attack target out of range");

    const ExecutionPlan plan = topo_order(topology);
    Transcript t;
    for (std::size_t round = 0; round < k_rounds; ++round) {
        Rng round_rng = rng.child(round);
        std::vector<AgentResponse> responses;
        try {
            responses = run_round(topology, agents, backend, query, round, attack, round_rng);
        } catch (const ExecutionError& e) {
            throw DialogueError(e.what(), std::move(t));
        }
        t.rounds.push_back(responses);

        AgentResponse agg_response;
        Rng agg_rng = rng.child(100000 + round);
        const std::string answer =
            aggregate(responses, strategy, plan, agents, query,
                      strategy.kind == AggregationKind::SummarizerAgent ? &backend : nullptr,
                      agg_rng, &agg_response);
        t.answers.push_back(answer);
        if (strategy.kind == AggregationKind::SummarizerAgent)
            t.aggregator_responses.push_back(agg_response);

        // Memory update between rounds: each agent keeps its five most recent
        // own utterances.
        for (const auto& r : responses) {
            for (auto& a : agents) {
                if (a.id == r.agent_id) {
                    a.state.push_back(r.text);
                    if (a.state.size() > 5)
                        a.state.erase(a.state.begin(),
                                      a.state.end() - 5);
                }
            }
        }
    }
    t.final_answer = t.answers.back();
    for (const auto& round : t.rounds) {
        for (const auto& r : round) {
            t.total_prompt_tokens += r.prompt_tokens;
            t.total_completion_tokens += r.completion_tokens;
        }
    }
    for (const auto& r : t.aggregator_responses) {
        t.total_prompt_tokens += r.prompt_tokens;
        t.total_completion_tokens += r.completion_tokens;
    }
    return t;
}

} // namespace gdesigner
