#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gdesigner/agents.hpp"
#include "gdesigner/designer.hpp"
#include "gdesigner/executor.hpp"
#include "gdesigner/tasks.hpp"
#include "gdesigner/trainer.hpp"

namespace gdesigner {

struct MacpWeights {
    double beta1 = 0.01; // per DAG edge
    double beta2 = 1.0;  // per unit of robustness drop
};

double macp_score(double mean_utility, double mean_edges, double robustness_drop,
                  const MacpWeights& weights);

struct BenchReport {
    std::string method;
    std::size_t task_count = 0;
    double mean_utility = 0.0;
    double mean_edges = 0.0;     // executed DAG edges
    double mean_raw_edges = 0.0; // before cycle breaking (cyclic fixed baselines)
    std::size_t total_prompt_tokens = 0;
    std::size_t total_completion_tokens = 0;
    double macp_score = 0.0;
    std::optional<double> robustness_drop;
    std::map<std::string, double> mean_edges_by_category;
    std::map<std::string, double> mean_utility_by_category;
};

std::string report_to_json(const BenchReport& report);
std::string report_csv_header();
std::string report_to_csv_row(const BenchReport& report);

// --- Run configuration -------------------------------------------------------

struct BackendConfig {
    std::string kind = "mock"; // mock | http
    std::string base_url;
    std::string model;
    double temperature = 1.0;
    MockBackendConfig mock;
};

struct EmbedderConfig {
    std::string kind = "hash"; // hash | http
    std::size_t dim = 384;
    std::string base_url;
    std::string model;
};

struct AggregateConfig {
    std::string kind = "majority_vote";
    std::string summarizer_role = "summarizer";
};

struct RunConfig {
    std::vector<AgentSpec> agents;
    BackendConfig backend;
    EmbedderConfig embedder;
    TrainConfig train;
    AggregateConfig aggregate;
    MacpWeights macp;
    std::string anchor = "chain";
    ModelDims dims; // embed_dim mirrors embedder.dim

    void validate() const;
};

/// Strict parse of the documented JSON schema; unknown fields are rejected.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Materialized backends + strategy for a configuration.
struct RunContext {
    RunConfig config;
    std::unique_ptr<AgentBackend> backend;
    std::unique_ptr<Embedder> embedder;
    AggregationStrategy strategy;

    TrainEnv train_env() const;
};

RunContext make_context(RunConfig config);

// --- Suite runners ------------------------------------------------------------

/// What provides the topology for a sweep: a fixed structural baseline or a
/// trained designer checkpoint.
struct TopologySource {
    enum Kind { Baseline, Designer } kind = Baseline;
    AnchorKind baseline = AnchorKind::Chain;
    const Checkpoint* checkpoint = nullptr;

    static TopologySource from_baseline(AnchorKind k) { return {Baseline, k, nullptr}; }
    static TopologySource from_checkpoint(const Checkpoint& ck) {
        return {Designer, AnchorKind::Chain, &ck};
    }
    std::string name() const;
};

BenchReport run_suite(const TopologySource& source, const std::vector<SyntheticTask>& suite,
                      const RunContext& ctx, const std::optional<AttackSpec>& attack);

BenchReport run_baseline(AnchorKind kind, const std::vector<SyntheticTask>& suite,
                         const RunContext& ctx);

BenchReport run_designer(const Checkpoint& checkpoint,
                         const std::vector<SyntheticTask>& suite, const RunContext& ctx);

/// Runs the suite twice (clean, attacked); the attacked report carries
/// robustness_drop = clean.mean_utility - attacked.mean_utility.
std::pair<BenchReport, BenchReport> run_attack(const TopologySource& source,
                                               const std::vector<SyntheticTask>& suite,
                                               const AttackSpec& attack,
                                               const RunContext& ctx);

// --- Export -------------------------------------------------------------------

std::string topology_to_dot(const CommTopology& topology,
                            const std::vector<AgentSpec>& agents);
void export_dot(const CommTopology& topology, const std::vector<AgentSpec>& agents,
                const std::string& path);

std::string transcript_to_json(const Transcript& transcript);

} // namespace gdesigner
