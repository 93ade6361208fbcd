#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdesigner/agents.hpp"
#include "gdesigner/designer.hpp"
#include "gdesigner/executor.hpp"
#include "gdesigner/network.hpp"
#include "gdesigner/tasks.hpp"

namespace gdesigner {

struct TrainConfig {
    std::size_t m_samples = 10;
    std::size_t k_rounds = 3;
    double tau = 1e-2;
    double zeta = 1e-1;
    double threshold = 0.5;
    std::size_t rank = 0; // 0 = auto ceil(N/2)
    double learning_rate = 0.01;
    std::size_t budget = 40;
    std::uint64_t seed = 1;
    bool baseline = true;
    double beta1_cost = 0.01;
    double beta2_robust = 1.0;

    DesignConfig design_config(bool deterministic) const {
        return DesignConfig{tau, zeta, threshold, rank, deterministic};
    }
    void validate() const;
};

/// One sampled topology and its outcome.
struct EpisodeRecord {
    Matrix sampled_edges; // 0/1 mask, zero diagonal
    Matrix edge_probs;    // clamped refined probabilities at sample time
    double utility = 0.0;
    double log_prob = 0.0;
};

struct EpisodeBatch {
    std::vector<EpisodeRecord> records;
    std::vector<std::size_t> dag_edge_counts;
};

/// Gradients mirror the parameter layout.
using ParamGrads = DesignerParams;

/// The scalar objective of one REINFORCE step with every stochastic choice
/// frozen: surrogate(p) = (1/M) sum_m advantage_m * log_prob_m(p)
///                        + l_anchor(p) + l_sparse(p).
/// log_prob_m scores episode m's sampled mask under the per-edge marginal
/// Bernoulli law of the low-temperature limit, p_ij = (sigmoid(w_ij) + A_ij)/2
/// clamped away from {0,1}: at the sampling temperature the relaxed sketch is
/// numerically a coin flip landing on sigmoid(logit), and scoring against this
/// marginal keeps every score-function term bounded. The pathwise route would
/// differentiate a saturated sigmoid whose slope underflows to zero almost
/// everywhere, and routing scores through the rank-r projection couples pairs
/// so that near-clamp likelihood ratios explode. The regularizers descend the
/// same deterministic replay with the refinement factors frozen at the base
/// parameters. value() and gradient() describe one function, cross-checked by
/// finite differences in the tests.
class StepContext {
public:
    StepContext(const TaskGraph& graph, const TrainConfig& config,
                const DesignerParams& base_params, const EpisodeBatch& batch);

    double value(const DesignerParams& p) const;
    /// d value / d p: the finite-difference-checkable derivative.
    ParamGrads gradient(const DesignerParams& p) const;
    /// Training direction: descend -policy_term + l_anchor + l_sparse.
    ParamGrads descent_gradient(const DesignerParams& p) const;

    struct Components {
        double policy_term = 0.0;
        double l_anchor = 0.0;
        double l_sparse = 0.0;
    };
    Components components(const DesignerParams& p) const;

    const std::vector<double>& advantages() const { return advantages_; }
    double mean_utility() const { return mean_utility_; }

private:
    void accumulate_parts(const DesignerParams& p, ParamGrads& policy_out,
                          ParamGrads& reg_out) const;

    const TaskGraph& graph_;
    TrainConfig config_;
    std::vector<EpisodeRecord> records_;
    std::vector<double> advantages_;
    double mean_utility_ = 0.0;
    // Deterministic-mode design at the base parameters, frozen for the
    // regularizer terms.
    Matrix det_s_tilde0_;
    Matrix det_z0_;
    Matrix det_c0_;
};

/// l_anchor = 0.5*||S - S~||_F^2 + 0.5*||A - S~||_F^2 ; l_sparse = zeta*||W||*.
std::pair<double, double> compute_losses(const SketchMatrix& sketch,
                                         const RefinedMatrix& refined,
                                         const AdjacencyMatrix& anchor, double zeta);

struct AdamState {
    ParamGrads m;
    ParamGrads v;
    std::size_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(const DesignerParams& p);
    void apply(DesignerParams& params, const ParamGrads& grads, double lr);
};

/// Everything an episode needs besides the designer state.
struct TrainEnv {
    std::vector<AgentSpec> agents;
    AgentBackend* backend = nullptr;
    Embedder* embedder = nullptr;
    AggregationStrategy strategy;
    AnchorKind anchor_kind = AnchorKind::Chain;
    ModelDims dims;
};

EpisodeBatch sample_episodes(const TaskGraph& graph, const DesignerParams& params,
                             const TrainConfig& config, const SyntheticTask& task,
                             const TrainEnv& env, Rng& rng);

/// One policy-gradient + regularizer update. Throws NumericError (leaving
/// params untouched) if any gradient entry is non-finite.
StepContext::Components reinforce_step(const EpisodeBatch& batch, const TaskGraph& graph,
                                       DesignerParams& params, const TrainConfig& config,
                                       AdamState& adam);

struct TrainLogEntry {
    std::size_t query_index = 0;
    double mean_utility = 0.0;
    double mean_edges = 0.0;
    double l_anchor = 0.0;
    double l_sparse = 0.0;
};

struct TrainResult {
    DesignerParams params;
    std::vector<TrainLogEntry> log;
    std::size_t trained_queries = 0;
    std::size_t skipped_steps = 0;
};

TrainResult train(const std::vector<SyntheticTask>& tasks, const TrainEnv& env,
                  const TrainConfig& config);
TrainResult train(const std::vector<SyntheticTask>& tasks, const TrainEnv& env,
                  const TrainConfig& config, DesignerParams initial_params);

// --- Checkpoint persistence -------------------------------------------------

inline constexpr const char* kCheckpointVersion = "gdesigner-ckpt-v1";

struct Checkpoint {
    std::string version = kCheckpointVersion;
    TrainConfig config;
    ModelDims dims;
    DesignerParams params;
    std::uint64_t rng_seed = 0;
    std::size_t trained_queries = 0;
};

/// Reals are written with 17 significant digits, so load(save(c)) round-trips
/// every double bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

std::string train_log_to_jsonl(const std::vector<TrainLogEntry>& log);

} // namespace gdesigner
