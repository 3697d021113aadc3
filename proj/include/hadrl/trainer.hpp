#pragma once

// Episode loop, greedy evaluation, cross-run comparison and activation dumps.
//
// Metrics file (CSV, one row per episode, flushed as it is written):
//
//     episode,return,steps,epsilon,loss_mean,eval_return,eval_steps,wall_ms,seed
//
// `episode` counts from 1. `loss_mean` is the mean over agents of each
// agent's mean loss within the episode, empty when no update ran.
// `eval_*` are empty on episodes without a greedy evaluation. `wall_ms` is 0
// unless wall-clock recording is enabled, so that repeated runs produce
// byte-identical files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hadrl/agents.hpp"
#include "hadrl/pentest_env.hpp"
#include "hadrl/scenario.hpp"

namespace hadrl {

enum class Algorithm { hadrl, ddqn };

inline std::string to_string(Algorithm a) { return a == Algorithm::hadrl ? "hadrl" : "ddqn"; }

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "hadrl") return Algorithm::hadrl;
    if (s == "ddqn") return Algorithm::ddqn;
    throw std::invalid_argument("unknown algorithm '" + s + "' (expected hadrl or ddqn)");
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of the
/// run, constant afterwards.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    double decay_fraction = 0.2;

    double at(std::uint64_t episode, std::uint64_t total) const {
        const double horizon = decay_fraction * static_cast<double>(total);
        if (horizon <= 0.0) return end;
        const double frac = static_cast<double>(episode) / horizon;
        if (frac >= 1.0) return end;
        return start + (end - start) * frac;
    }
};

struct RunConfig {
    ScenarioSpec scenario;
    Algorithm algorithm = Algorithm::hadrl;
    std::uint32_t max_branch = 10;
    std::uint64_t episodes = 1000;
    std::uint64_t seed = 0;
    AgentConfig agent;
    std::size_t batch_size = 64;
    std::size_t buffer_capacity = 100000;
    std::size_t learn_start = 1000;  // transitions stored before the first update
    std::size_t train_every = 1;     // environment steps per update round
    EpsilonSchedule epsilon;
    std::uint64_t eval_every = 50;
    std::uint64_t eval_episodes = 10;
    std::filesystem::path output_dir;  // empty: write nothing
    bool record_wall_time = false;

    void validate() const {
        hadrl::validate(scenario);
        if (eval_every < 1) throw ConfigError("evaluation cadence must be >= 1");
        if (eval_episodes < 1) throw ConfigError("evaluation episode count must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (train_every < 1) throw ConfigError("train_every must be >= 1");
        if (max_branch < 2) throw ConfigError("max_branch must be >= 2");
        if (!(agent.gamma >= 0.0 && agent.gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    }
};

struct MetricsRecord {
    std::uint64_t episode = 0;
    double episode_return = 0.0;
    std::uint64_t steps = 0;
    double epsilon = 0.0;
    std::optional<double> loss_mean;
    std::optional<double> eval_return;
    std::optional<double> eval_steps;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsHeader = "episode,return,steps,epsilon,loss_mean,eval_return,eval_steps,wall_ms,seed";

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

}  // namespace detail

inline std::string to_csv_row(const MetricsRecord& r) {
    std::ostringstream os;
    os << r.episode << ',' << detail::fmt_double(r.episode_return) << ',' << r.steps << ','
       << detail::fmt_double(r.epsilon) << ',' << detail::fmt_opt(r.loss_mean) << ',' << detail::fmt_opt(r.eval_return)
       << ',' << detail::fmt_opt(r.eval_steps) << ',' << detail::fmt_double(r.wall_ms) << ',' << r.seed;
    return os.str();
}

inline std::vector<MetricsRecord> read_metrics(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("metrics file has wrong header");
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() == 8) f.emplace_back();
        if (f.size() != 9) throw std::runtime_error("malformed metrics row: " + line);
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        MetricsRecord r;
        r.episode = std::stoull(f[0]);
        r.episode_return = std::stod(f[1]);
        r.steps = std::stoull(f[2]);
        r.epsilon = std::stod(f[3]);
        r.loss_mean = opt(f[4]);
        r.eval_return = opt(f[5]);
        r.eval_steps = opt(f[6]);
        r.wall_ms = std::stod(f[7]);
        r.seed = std::stoull(f[8]);
        out.push_back(r);
    }
    return out;
}

inline std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return read_metrics(in);
}

struct EvalResult {
    double mean_return = 0.0;
    double mean_steps = 0.0;
};

/// Greedy rollouts. Episode k resets `env` with mix_seed(seed, k). Mutates
/// only the environment.
inline EvalResult evaluate(PentestEnv& env, const AgentGroup& group, std::uint64_t episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("evaluation needs at least one episode");
    double total_return = 0.0, total_steps = 0.0;
    for (std::uint64_t k = 0; k < episodes; ++k) {
        auto obs = env.reset(mix_seed(seed, k));
        bool done = false;
        while (!done) {
            auto [digits, action] = group.greedy(obs);
            auto r = env.step(action);
            total_return += r.reward;
            obs = std::move(r.observation);
            done = r.done;
        }
        total_steps += env.state().steps;
    }
    return {total_return / static_cast<double>(episodes), total_steps / static_cast<double>(episodes)};
}

inline AgentGroup make_group(const RunConfig& cfg, ActionId total_actions, std::size_t input_width) {
    const auto seed = mix_seed(cfg.seed, 1);
    if (cfg.algorithm == Algorithm::ddqn) return build_baseline(total_actions, input_width, cfg.agent, seed);
    return build_hadrl(total_actions, cfg.max_branch, input_width, cfg.agent, seed);
}

struct TrainResult {
    std::vector<MetricsRecord> history;
    AgentGroup group;
    EvalResult final_eval;
};

/// Writes metrics.csv, checkpoint/ and run.txt under cfg.output_dir when it
/// is set.
inline TrainResult train(const RunConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;

    PentestEnv env(cfg.scenario);
    PentestEnv eval_env(cfg.scenario);
    const std::uint64_t train_stream = mix_seed(cfg.seed, 2);
    const std::uint64_t eval_stream = mix_seed(cfg.seed, 3);
    Rng rng(mix_seed(cfg.seed, 4));

    TrainResult result;
    result.group = make_group(cfg, env.total_actions(), env.observation_width());
    AgentGroup& group = result.group;
    ReplayBuffer buffer(cfg.buffer_capacity);

    std::ofstream metrics;
    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        metrics.open(cfg.output_dir / "metrics.csv", std::ios::trunc);
        if (!metrics) throw std::runtime_error("cannot write metrics in " + cfg.output_dir.string());
        metrics << kMetricsHeader << '\n' << std::flush;
        std::ofstream run(cfg.output_dir / "run.txt", std::ios::trunc);
        run << "scenario " << cfg.scenario.name << "\nalgorithm " << to_string(cfg.algorithm) << "\nseed " << cfg.seed
            << "\nepisodes " << cfg.episodes << "\n";
        std::ofstream scn(cfg.output_dir / "scenario.scn", std::ios::trunc);
        scn << to_config_text(cfg.scenario);
    }

    std::uint64_t global_step = 0;
    std::uint64_t eval_count = 0;
    for (std::uint64_t ep = 0; ep < cfg.episodes; ++ep) {
        const auto t0 = std::chrono::steady_clock::now();
        const double eps = cfg.epsilon.at(ep, cfg.episodes);
        group.set_epsilon(eps);

        auto obs = env.reset(mix_seed(train_stream, ep));
        double ret = 0.0;
        std::vector<double> loss_sum(group.levels(), 0.0);
        std::uint64_t loss_count = 0;
        bool done = false;
        while (!done) {
            auto [digits, action] = group.select_joint(obs, eps, rng);
            auto r = env.step(action);
            ret += r.reward;
            done = r.done;
            Transition t{obs, std::move(digits), action, r.reward, r.observation, r.done};
            buffer.push(group.plan(), std::move(t));
            obs = std::move(r.observation);
            ++global_step;

            if (buffer.size() >= std::max(cfg.learn_start, cfg.batch_size) && global_step % cfg.train_every == 0) {
                if (auto batch = buffer.sample(cfg.batch_size, rng)) {
                    auto losses = group.update_all(*batch);
                    for (std::size_t i = 0; i < losses.size(); ++i) loss_sum[i] += losses[i];
                    ++loss_count;
                }
            }
        }

        MetricsRecord rec;
        rec.episode = ep + 1;
        rec.episode_return = ret;
        rec.steps = env.state().steps;
        rec.epsilon = eps;
        rec.seed = cfg.seed;
        if (loss_count > 0) {
            double m = 0.0;
            for (double s : loss_sum) m += s / static_cast<double>(loss_count);
            rec.loss_mean = m / static_cast<double>(group.levels());
        }
        if ((ep + 1) % cfg.eval_every == 0 || ep + 1 == cfg.episodes) {
            auto ev = evaluate(eval_env, group, cfg.eval_episodes, mix_seed(eval_stream, eval_count++));
            rec.eval_return = ev.mean_return;
            rec.eval_steps = ev.mean_steps;
            result.final_eval = ev;
        }
        if (cfg.record_wall_time)
            rec.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (metrics.is_open()) metrics << to_csv_row(rec) << '\n' << std::flush;
        result.history.push_back(rec);
    }
    group.set_epsilon(cfg.epsilon.at(cfg.episodes, cfg.episodes));
    if (cfg.episodes == 0) result.final_eval = evaluate(eval_env, group, cfg.eval_episodes, eval_stream);
    if (!cfg.output_dir.empty()) group.save(cfg.output_dir / "checkpoint");
    return result;
}

// ---------------------------------------------------------------------------
// Comparison across seeds.

struct RunRecord {
    std::string scenario;
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<MetricsRecord> metrics;
};

/// Reads run.txt and metrics.csv written by train().
inline RunRecord load_run(const std::filesystem::path& dir) {
    RunRecord r;
    std::ifstream in(dir / "run.txt");
    if (!in) throw std::runtime_error("missing run.txt in " + dir.string());
    std::string key, value;
    while (in >> key >> value) {
        if (key == "scenario") r.scenario = value;
        else if (key == "algorithm") r.algorithm = value;
        else if (key == "seed") r.seed = std::stoull(value);
    }
    r.metrics = read_metrics(dir / "metrics.csv");
    return r;
}

inline constexpr std::uint64_t kNeverCrossed = std::numeric_limits<std::uint64_t>::max();

/// First evaluated episode whose greedy return reaches `threshold`, or
/// kNeverCrossed.
inline std::uint64_t episodes_to_threshold(const std::vector<MetricsRecord>& metrics, double threshold) {
    for (const auto& m : metrics)
        if (m.eval_return && *m.eval_return >= threshold) return m.episode;
    return kNeverCrossed;
}

/// Median treating kNeverCrossed as +infinity.
inline double median_episodes(std::vector<std::uint64_t> v) {
    if (v.empty()) return std::numeric_limits<double>::infinity();
    std::sort(v.begin(), v.end());
    auto as_d = [](std::uint64_t x) {
        return x == kNeverCrossed ? std::numeric_limits<double>::infinity() : static_cast<double>(x);
    };
    const std::size_t n = v.size();
    if (n % 2 == 1) return as_d(v[n / 2]);
    return 0.5 * (as_d(v[n / 2 - 1]) + as_d(v[n / 2]));
}

struct AlgorithmSummary {
    std::string algorithm;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> per_seed;  // (seed, episodes or kNeverCrossed)
    double median = 0.0;
    std::size_t successes = 0;
};

struct CompareSummary {
    std::string scenario;
    double threshold = 0.0;
    AlgorithmSummary a;
    AlgorithmSummary b;
};

inline AlgorithmSummary summarize(const std::vector<RunRecord>& runs, double threshold) {
    AlgorithmSummary s;
    if (!runs.empty()) s.algorithm = runs.front().algorithm;
    std::vector<std::uint64_t> eps;
    for (const auto& r : runs) {
        auto e = episodes_to_threshold(r.metrics, threshold);
        s.per_seed.emplace_back(r.seed, e);
        eps.push_back(e);
        if (e != kNeverCrossed) ++s.successes;
    }
    s.median = median_episodes(eps);
    return s;
}

/// Threshold is `fraction` of the oracle's best return.
inline CompareSummary compare(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b, double oracle_return,
                              double fraction = 0.9) {
    if (a.empty() || b.empty()) throw std::invalid_argument("compare needs runs on both sides");
    const std::string scenario = a.front().scenario;
    std::vector<std::uint64_t> seeds_a, seeds_b;
    for (const auto& r : a) {
        if (r.scenario != scenario) throw std::invalid_argument("runs use different scenarios");
        seeds_a.push_back(r.seed);
    }
    for (const auto& r : b) {
        if (r.scenario != scenario) throw std::invalid_argument("runs use different scenarios");
        seeds_b.push_back(r.seed);
    }
    std::sort(seeds_a.begin(), seeds_a.end());
    std::sort(seeds_b.begin(), seeds_b.end());
    if (seeds_a != seeds_b) throw std::invalid_argument("runs use different seed sets");

    CompareSummary out;
    out.scenario = scenario;
    out.threshold = fraction * oracle_return;
    out.a = summarize(a, out.threshold);
    out.b = summarize(b, out.threshold);
    return out;
}

/// Plain-text summary:
///
///     scenario=<name>
///     threshold=<t>
///     algorithm=<name> successes=<k>/<n> median=<episodes|inf>
///     seed=<s> episodes=<e|inf>        (one line per run, then the next algorithm)
inline void write_summary(std::ostream& os, const CompareSummary& s) {
    auto ep = [](std::uint64_t e) { return e == kNeverCrossed ? std::string("inf") : std::to_string(e); };
    auto med = [](double m) { return std::isinf(m) ? std::string("inf") : detail::fmt_double(m); };
    os << "scenario=" << s.scenario << "\nthreshold=" << detail::fmt_double(s.threshold) << "\n";
    for (const auto* side : {&s.a, &s.b}) {
        os << "algorithm=" << side->algorithm << " successes=" << side->successes << "/" << side->per_seed.size()
           << " median=" << med(side->median) << "\n";
        for (const auto& [seed, e] : side->per_seed) os << "seed=" << seed << " episodes=" << ep(e) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Hidden-activation dump for external projection tools.
//
// CSV header `agent,action,h0,...,h{w-1}`, then one row per (visited state,
// agent) in visit order: agent level, that agent's greedy primitive action,
// and its penultimate-layer activations.

inline std::size_t dump_embeddings(std::ostream& os, const AgentGroup& group, PentestEnv& env, std::uint64_t episodes,
                                   std::uint64_t seed) {
    if (group.levels() == 0) return 0;
    const std::size_t width = group.agents()[0].online.architecture().penultimate_width();
    os << "agent,action";
    for (std::size_t i = 0; i < width; ++i) os << ",h" << i;
    os << "\n";
    std::size_t rows = 0;
    for (std::uint64_t k = 0; k < episodes; ++k) {
        auto obs = env.reset(mix_seed(seed, k));
        bool done = false;
        while (!done) {
            for (const auto& a : group.agents()) {
                auto q = forward(a.online, obs);
                auto h = penultimate(a.online, obs);
                os << a.level << ',' << argmax(q);
                for (double v : h) os << ',' << detail::fmt_double(v);
                os << '\n';
                ++rows;
            }
            auto [digits, action] = group.greedy(obs);
            auto r = env.step(action);
            obs = std::move(r.observation);
            done = r.done;
        }
    }
    return rows;
}

}  // namespace hadrl
