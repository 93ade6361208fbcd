#include "gdesigner/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gdesigner/errors.hpp"
#include "gdesigner/network.hpp"

namespace gdesigner {

using nlohmann::json;

namespace {

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return std::string(buf);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown field \"" + it.key() + "\" in " + where);
    }
}

} // namespace

double macp_score(double mean_utility, double mean_edges, double robustness_drop,
                  const MacpWeights& weights) {
    return -mean_utility + weights.beta1 * mean_edges + weights.beta2 * robustness_drop;
}

std::string report_to_json(const BenchReport& r) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"method\": \"" << r.method << "\",\n";
    os << "  \"task_count\": " << r.task_count << ",\n";
    os << "  \"mean_utility\": " << fmt_real(r.mean_utility) << ",\n";
    os << "  \"mean_edges\": " << fmt_real(r.mean_edges) << ",\n";
    os << "  \"mean_raw_edges\": " << fmt_real(r.mean_raw_edges) << ",\n";
    os << "  \"total_prompt_tokens\": " << r.total_prompt_tokens << ",\n";
    os << "  \"total_completion_tokens\": " << r.total_completion_tokens << ",\n";
    os << "  \"macp_score\": " << fmt_real(r.macp_score) << ",\n";
    if (r.robustness_drop)
        os << "  \"robustness_drop\": " << fmt_real(*r.robustness_drop) << ",\n";
    os << "  \"mean_edges_by_category\": {";
    bool first = true;
    for (const auto& [k, v] : r.mean_edges_by_category) {
        os << (first ? "" : ", ") << "\"" << k << "\": " << fmt_real(v);
        first = false;
    }
    os << "},\n  \"mean_utility_by_category\": {";
    first = true;
    for (const auto& [k, v] : r.mean_utility_by_category) {
        os << (first ? "" : ", ") << "\"" << k << "\": " << fmt_real(v);
        first = false;
    }
    os << "}\n}\n";
    return os.str();
}

std::string report_csv_header() {
    return "method,task_count,mean_utility,mean_edges,mean_raw_edges,"
           "total_prompt_tokens,total_completion_tokens,macp_score,robustness_drop";
}

std::string report_to_csv_row(const BenchReport& r) {
    std::ostringstream os;
    os << r.method << ',' << r.task_count << ',' << fmt_real(r.mean_utility) << ','
       << fmt_real(r.mean_edges) << ',' << fmt_real(r.mean_raw_edges) << ','
       << r.total_prompt_tokens << ',' << r.total_completion_tokens << ','
       << fmt_real(r.macp_score) << ','
       << (r.robustness_drop ? fmt_real(*r.robustness_drop) : "");
    return os.str();
}

// --- Configuration ------------------------------------------------------------

void RunConfig::validate() const {
    if (agents.empty()) throw ConfigError("config: agents must be non-empty");
    std::set<std::size_t> ids;
    for (const auto& a : agents) {
        if (a.role.empty()) throw ConfigError("config: agent role must be non-empty");
        if (!ids.insert(a.id).second)
            throw ConfigError("config: duplicate agent id " + std::to_string(a.id));
    }
    for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].id != i)
            throw ConfigError("config: agent ids must be 0..N-1 in order");
    if (backend.kind != "mock" && backend.kind != "http")
        throw ConfigError("config: backend.kind must be mock or http");
    if (embedder.kind != "hash" && embedder.kind != "http")
        throw ConfigError("config: embedder.kind must be hash or http");
    if (embedder.dim == 0) throw ConfigError("config: embedder.dim must be positive");
    train.validate();
    (void)aggregation_kind_from_string(aggregate.kind);
    (void)anchor_kind_from_string(anchor);
}

RunConfig parse_run_config(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: invalid JSON");

    RunConfig cfg;
    reject_unknown(j, {"agents", "backend", "embedder", "train", "aggregate", "macp",
                       "anchor", "dims"},
                   "top level");

    if (!j.contains("agents")) throw ConfigError("config: missing agents");
    for (const auto& ja : j.at("agents")) {
        reject_unknown(ja, {"id", "base", "role", "plugins", "state"}, "agents[]");
        AgentSpec a;
        a.id = ja.at("id").get<std::size_t>();
        a.base_descriptor = ja.value("base", std::string());
        a.role = ja.at("role").get<std::string>();
        if (ja.contains("plugins"))
            a.plugins = ja.at("plugins").get<std::vector<std::string>>();
        if (ja.contains("state"))
            a.state = ja.at("state").get<std::vector<std::string>>();
        cfg.agents.push_back(std::move(a));
    }

    if (j.contains("backend")) {
        const auto& jb = j.at("backend");
        reject_unknown(jb,
                       {"kind", "base_url", "model", "temperature", "seed",
                        "steps_per_turn", "default_skill", "skills", "agent_skills",
                        "non_adoptive"},
                       "backend");
        cfg.backend.kind = jb.value("kind", std::string("mock"));
        cfg.backend.base_url = jb.value("base_url", std::string());
        cfg.backend.model = jb.value("model", std::string());
        cfg.backend.temperature = jb.value("temperature", 1.0);
        cfg.backend.mock.seed = jb.value("seed", std::uint64_t{1});
        cfg.backend.mock.steps_per_turn = jb.value("steps_per_turn", 1);
        cfg.backend.mock.default_skill = jb.value("default_skill", 1.0);
        if (jb.contains("skills"))
            for (auto it = jb.at("skills").begin(); it != jb.at("skills").end(); ++it)
                cfg.backend.mock.category_skill[it.key()] = it.value().get<double>();
        if (jb.contains("agent_skills")) {
            for (const auto& js : jb.at("agent_skills")) {
                reject_unknown(js, {"id", "category", "p"}, "backend.agent_skills[]");
                cfg.backend.mock.agent_skill.push_back(
                    {js.at("id").get<std::size_t>(),
                     js.at("category").get<std::string>(), js.at("p").get<double>()});
            }
        }
        if (jb.contains("non_adoptive"))
            for (const auto& id : jb.at("non_adoptive"))
                cfg.backend.mock.adoptive[id.get<std::size_t>()] = false;
    }

    if (j.contains("embedder")) {
        const auto& je = j.at("embedder");
        reject_unknown(je, {"kind", "dim", "base_url", "model"}, "embedder");
        cfg.embedder.kind = je.value("kind", std::string("hash"));
        cfg.embedder.dim = je.value("dim", std::size_t{384});
        cfg.embedder.base_url = je.value("base_url", std::string());
        cfg.embedder.model = je.value("model", std::string());
    }

    if (j.contains("train")) {
        const auto& jt = j.at("train");
        reject_unknown(jt,
                       {"m", "k", "tau", "zeta", "threshold", "rank", "lr", "budget",
                        "seed", "baseline"},
                       "train");
        cfg.train.m_samples = jt.value("m", std::size_t{10});
        cfg.train.k_rounds = jt.value("k", std::size_t{3});
        cfg.train.tau = jt.value("tau", 1e-2);
        cfg.train.zeta = jt.value("zeta", 1e-1);
        cfg.train.threshold = jt.value("threshold", 0.5);
        cfg.train.rank = jt.value("rank", std::size_t{0});
        cfg.train.learning_rate = jt.value("lr", 0.01);
        cfg.train.budget = jt.value("budget", std::size_t{40});
        cfg.train.seed = jt.value("seed", std::uint64_t{1});
        cfg.train.baseline = jt.value("baseline", true);
    }

    if (j.contains("aggregate")) {
        const auto& jg = j.at("aggregate");
        reject_unknown(jg, {"kind", "summarizer_role"}, "aggregate");
        cfg.aggregate.kind = jg.value("kind", std::string("majority_vote"));
        cfg.aggregate.summarizer_role = jg.value("summarizer_role", std::string("summarizer"));
    }

    if (j.contains("macp")) {
        const auto& jm = j.at("macp");
        reject_unknown(jm, {"beta1", "beta2"}, "macp");
        cfg.macp.beta1 = jm.value("beta1", 0.01);
        cfg.macp.beta2 = jm.value("beta2", 1.0);
        cfg.train.beta1_cost = cfg.macp.beta1;
        cfg.train.beta2_robust = cfg.macp.beta2;
    }

    cfg.anchor = j.value("anchor", std::string("chain"));

    if (j.contains("dims")) {
        const auto& jd = j.at("dims");
        reject_unknown(jd, {"d_hidden", "d_latent", "d_ffn"}, "dims");
        cfg.dims.d_hidden = jd.value("d_hidden", std::size_t{64});
        cfg.dims.d_latent = jd.value("d_latent", std::size_t{32});
        cfg.dims.d_ffn = jd.value("d_ffn", std::size_t{128});
    }
    cfg.dims.embed_dim = cfg.embedder.dim;

    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

TrainEnv RunContext::train_env() const {
    TrainEnv env;
    env.agents = config.agents;
    env.backend = backend.get();
    env.embedder = embedder.get();
    env.strategy = strategy;
    env.anchor_kind = anchor_kind_from_string(config.anchor);
    env.dims = config.dims;
    return env;
}

RunContext make_context(RunConfig config) {
    config.validate();
    RunContext ctx;
    ctx.config = std::move(config);

    if (ctx.config.backend.kind == "mock") {
        ctx.backend = std::make_unique<MockBackend>(ctx.config.backend.mock);
    } else {
        HttpClientConfig hc;
        hc.base_url = ctx.config.backend.base_url;
        hc.model = ctx.config.backend.model;
        hc.temperature = ctx.config.backend.temperature;
        ctx.backend = std::make_unique<HttpChatBackend>(hc);
    }

    if (ctx.config.embedder.kind == "hash") {
        ctx.embedder = std::make_unique<HashEmbedder>(ctx.config.embedder.dim);
    } else {
        HttpClientConfig hc;
        hc.base_url = ctx.config.embedder.base_url;
        hc.model = ctx.config.embedder.model;
        ctx.embedder = std::make_unique<HttpEmbedder>(hc, ctx.config.embedder.dim);
    }

    ctx.strategy.kind = aggregation_kind_from_string(ctx.config.aggregate.kind);
    if (ctx.strategy.kind == AggregationKind::SummarizerAgent) {
        AgentSpec s;
        s.id = ctx.config.agents.size();
        s.base_descriptor = "aggregation model";
        s.role = ctx.config.aggregate.summarizer_role;
        ctx.strategy.summarizer = s;
    }
    return ctx;
}

// --- Suite runners ------------------------------------------------------------

std::string TopologySource::name() const {
    if (kind == Designer) return "designer";
    return to_string(baseline);
}

namespace {

struct TaskOutcome {
    double utility = 0.0;
    std::size_t dag_edges = 0;
    std::size_t raw_edges = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

} // namespace

BenchReport run_suite(const TopologySource& source, const std::vector<SyntheticTask>& suite,
                      const RunContext& ctx, const std::optional<AttackSpec>& attack) {
    if (attack && attack->target_agent >= ctx.config.agents.size())
        throw ConfigError("run_suite: attack target out of range");
    if (source.kind == TopologySource::Designer && !source.checkpoint)
        throw ConfigError("run_suite: designer source without checkpoint");

    const std::size_t n = ctx.config.agents.size();
    const AnchorKind anchor = anchor_kind_from_string(ctx.config.anchor);
    Rng base_rng(ctx.config.train.seed);

    // Fixed baselines share one topology across tasks.
    CommTopology fixed_topology;
    std::size_t fixed_raw_edges = 0;
    if (source.kind == TopologySource::Baseline) {
        Rng anchor_rng = base_rng.child(900001);
        const AdjacencyMatrix a = make_anchor(source.baseline, n, anchor_rng);
        fixed_raw_edges = a.edge_count();
        std::vector<CommEdge> candidates;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (a.has_edge(i, j)) candidates.push_back({i, j, 1.0});
        fixed_topology = break_cycles(n, std::move(candidates));
    }

    std::vector<TaskOutcome> outcomes(suite.size());
    std::vector<std::string> failures(suite.size());
    std::vector<Rng> streams;
    streams.reserve(suite.size());
    for (std::size_t t = 0; t < suite.size(); ++t) streams.push_back(base_rng.child(t));

    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(suite.size());
#pragma omp parallel for schedule(dynamic) if (count > 1)
    for (std::ptrdiff_t ti = 0; ti < count; ++ti) {
        const std::size_t t = static_cast<std::size_t>(ti);
        const SyntheticTask& task = suite[t];
        Rng task_rng = streams[t];
        try {
            CommTopology topology;
            std::size_t raw_edges = 0;
            if (source.kind == TopologySource::Baseline) {
                topology = fixed_topology;
                raw_edges = fixed_raw_edges;
            } else {
                Rng anchor_rng = task_rng.child(900001);
                const TaskGraph graph = build_task_graph(ctx.config.agents, task.query,
                                                         anchor, *ctx.embedder, anchor_rng);
                DesignConfig dc = ctx.config.train.design_config(true);
                Rng design_rng = task_rng.child(900002);
                DesignResult d = design(graph, source.checkpoint->params, dc, design_rng);
                topology = d.topology;
                raw_edges = d.topology.edges.size();
            }

            Rng dialogue_rng = task_rng.child(900003);
            const Transcript tr =
                run_dialogue(topology, ctx.config.agents, *ctx.backend, task.query,
                             ctx.config.train.k_rounds, ctx.strategy, attack, dialogue_rng);

            TaskOutcome& out = outcomes[t];
            out.utility = evaluate(tr.final_answer, task);
            out.dag_edges = topology.edges.size();
            out.raw_edges = raw_edges;
            out.prompt_tokens = tr.total_prompt_tokens;
            out.completion_tokens = tr.total_completion_tokens;
        } catch (const std::exception& e) {
            // Exceptions must not escape the parallel region; rethrown below.
            failures[t] = e.what();
        }
    }
    for (std::size_t t = 0; t < suite.size(); ++t)
        if (!failures[t].empty())
            throw ExecutionError("run_suite: task " + std::to_string(t) + ": " +
                                 failures[t]);

    BenchReport r;
    r.method = source.name();
    r.task_count = suite.size();
    std::map<std::string, std::pair<double, std::size_t>> cat_edges;
    std::map<std::string, std::pair<double, std::size_t>> cat_util;
    for (std::size_t t = 0; t < suite.size(); ++t) {
        r.mean_utility += outcomes[t].utility;
        r.mean_edges += static_cast<double>(outcomes[t].dag_edges);
        r.mean_raw_edges += static_cast<double>(outcomes[t].raw_edges);
        r.total_prompt_tokens += outcomes[t].prompt_tokens;
        r.total_completion_tokens += outcomes[t].completion_tokens;
        auto& ce = cat_edges[suite[t].category];
        ce.first += static_cast<double>(outcomes[t].dag_edges);
        ce.second += 1;
        auto& cu = cat_util[suite[t].category];
        cu.first += outcomes[t].utility;
        cu.second += 1;
    }
    if (!suite.empty()) {
        r.mean_utility /= static_cast<double>(suite.size());
        r.mean_edges /= static_cast<double>(suite.size());
        r.mean_raw_edges /= static_cast<double>(suite.size());
    }
    for (const auto& [k, v] : cat_edges)
        r.mean_edges_by_category[k] = v.first / static_cast<double>(v.second);
    for (const auto& [k, v] : cat_util)
        r.mean_utility_by_category[k] = v.first / static_cast<double>(v.second);
    r.macp_score = macp_score(r.mean_utility, r.mean_edges, 0.0, ctx.config.macp);
    return r;
}

BenchReport run_baseline(AnchorKind kind, const std::vector<SyntheticTask>& suite,
                         const RunContext& ctx) {
    return run_suite(TopologySource::from_baseline(kind), suite, ctx, std::nullopt);
}

BenchReport run_designer(const Checkpoint& checkpoint,
                         const std::vector<SyntheticTask>& suite, const RunContext& ctx) {
    return run_suite(TopologySource::from_checkpoint(checkpoint), suite, ctx, std::nullopt);
}

std::pair<BenchReport, BenchReport> run_attack(const TopologySource& source,
                                               const std::vector<SyntheticTask>& suite,
                                               const AttackSpec& attack,
                                               const RunContext& ctx) {
    BenchReport clean = run_suite(source, suite, ctx, std::nullopt);
    BenchReport attacked = run_suite(source, suite, ctx, attack);
    attacked.method += "+attack";
    attacked.robustness_drop = clean.mean_utility - attacked.mean_utility;
    attacked.macp_score = macp_score(attacked.mean_utility, attacked.mean_edges,
                                     *attacked.robustness_drop, ctx.config.macp);
    return {std::move(clean), std::move(attacked)};
}

// --- Export -------------------------------------------------------------------

std::string topology_to_dot(const CommTopology& topology,
                            const std::vector<AgentSpec>& agents) {
    std::ostringstream os;
    os << "digraph gdesigner {\n";
    for (std::size_t i = 0; i < topology.n; ++i) {
        std::string role = i < agents.size() ? agents[i].role : std::string("?");
        os << "  " << i << " [label=\"" << i << ": " << role << "\"];\n";
    }
    for (const auto& e : topology.edges)
        os << "  " << e.from << " -> " << e.to << " [label=\"" << fmt_fixed(e.weight, 2)
           << "\"];\n";
    os << "}\n";
    return os.str();
}

void export_dot(const CommTopology& topology, const std::vector<AgentSpec>& agents,
                const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("export_dot: cannot open " + path);
    out << topology_to_dot(topology, agents);
    if (!out) throw ConfigError("export_dot: write failed for " + path);
}

std::string transcript_to_json(const Transcript& t) {
    std::ostringstream os;
    auto emit_response = [&](const AgentResponse& r) {
        json jr = {{"agent_id", r.agent_id},
                   {"text", r.text},
                   {"prompt_tokens", r.prompt_tokens},
                   {"completion_tokens", r.completion_tokens}};
        os << jr.dump();
    };
    os << "{\n  \"rounds\": [";
    for (std::size_t i = 0; i < t.rounds.size(); ++i) {
        os << (i ? ", " : "") << "[";
        for (std::size_t j = 0; j < t.rounds[i].size(); ++j) {
            if (j) os << ", ";
            emit_response(t.rounds[i][j]);
        }
        os << "]";
    }
    os << "],\n  \"aggregator_responses\": [";
    for (std::size_t i = 0; i < t.aggregator_responses.size(); ++i) {
        if (i) os << ", ";
        emit_response(t.aggregator_responses[i]);
    }
    os << "],\n  \"answers\": " << json(t.answers).dump() << ",\n";
    os << "  \"final_answer\": " << json(t.final_answer).dump() << ",\n";
    os << "  \"total_prompt_tokens\": " << t.total_prompt_tokens << ",\n";
    os << "  \"total_completion_tokens\": " << t.total_completion_tokens << "\n}\n";
    return os.str();
}

} // namespace gdesigner
