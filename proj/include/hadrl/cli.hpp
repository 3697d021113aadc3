#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 usage.

#include <fstream>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hadrl/action_algebra.hpp"
#include "hadrl/agents.hpp"
#include "hadrl/oracle.hpp"
#include "hadrl/pentest_env.hpp"
#include "hadrl/scenario.hpp"
#include "hadrl/trainer.hpp"

namespace hadrl::cli {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string format_plan(const DecompositionPlan& plan) {
    std::ostringstream os;
    os << "levels=" << plan.levels() << " radices=";
    for (std::size_t i = 0; i < plan.radices.size(); ++i) os << (i ? "," : "") << plan.radices[i];
    os << " capacity=" << plan.capacity;
    return os.str();
}

inline std::string format_return(double r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << r;
    return os.str();
}

struct TrainFlags {
    std::string scenario = "tiny";
    std::string algo = "hadrl";
    std::uint64_t episodes = 1000;
    std::uint64_t seed = 0;
    std::string out;
    std::uint32_t max_branch = 10;
    double lr = 1e-4;
    double gamma = 0.99;
    std::size_t batch = 64;
    std::size_t buffer = 100000;
    std::uint64_t sync_period = 1000;
    std::size_t learn_start = 1000;
    std::size_t train_every = 1;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay = 0.2;
    std::uint64_t eval_every = 50;
    std::uint64_t eval_episodes = 10;
    std::vector<std::size_t> trunk{128, 128};
    std::size_t value_hidden = 64;
    double max_grad_norm = 0.0;
    bool double_dqn = false;
    bool parallel = false;
    bool sgd = false;
    bool wall_clock = false;
    double exploit_prob = -1.0;
};

inline void add_train_options(CLI::App& cmd, TrainFlags& f) {
    cmd.add_option("--scenario", f.scenario, "preset name or scenario file")->capture_default_str();
    cmd.add_option("--algo", f.algo, "hadrl | ddqn")->check(CLI::IsMember({"hadrl", "ddqn"}))->capture_default_str();
    cmd.add_option("--episodes", f.episodes)->capture_default_str();
    cmd.add_option("--seed", f.seed)->capture_default_str();
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_option("--max-branch", f.max_branch, "largest per-agent action count")->capture_default_str();
    cmd.add_option("--lr", f.lr)->capture_default_str();
    cmd.add_option("--gamma", f.gamma)->capture_default_str();
    cmd.add_option("--batch", f.batch)->capture_default_str();
    cmd.add_option("--buffer", f.buffer)->capture_default_str();
    cmd.add_option("--sync-period", f.sync_period)->capture_default_str();
    cmd.add_option("--learn-start", f.learn_start)->capture_default_str();
    cmd.add_option("--train-every", f.train_every)->capture_default_str();
    cmd.add_option("--eps-start", f.eps_start)->capture_default_str();
    cmd.add_option("--eps-end", f.eps_end)->capture_default_str();
    cmd.add_option("--eps-decay", f.eps_decay, "fraction of episodes over which epsilon decays")->capture_default_str();
    cmd.add_option("--eval-every", f.eval_every)->capture_default_str();
    cmd.add_option("--eval-episodes", f.eval_episodes)->capture_default_str();
    cmd.add_option("--trunk", f.trunk, "hidden widths, e.g. 128,128")->delimiter(',')->capture_default_str();
    cmd.add_option("--value-hidden", f.value_hidden, "value-stream hidden width (0: none)")->capture_default_str();
    cmd.add_option("--max-grad-norm", f.max_grad_norm, "0 disables clipping")->capture_default_str();
    cmd.add_option("--exploit-prob", f.exploit_prob, "override the scenario's exploit success probability");
    cmd.add_flag("--double-dqn", f.double_dqn, "use a Double-DQN target");
    cmd.add_flag("--parallel", f.parallel, "update levels on separate threads");
    cmd.add_flag("--sgd", f.sgd, "plain gradient descent instead of Adam");
    cmd.add_flag("--wall-clock", f.wall_clock, "record wall_ms (makes metrics non-reproducible)");
}

inline RunConfig to_run_config(const TrainFlags& f) {
    RunConfig c;
    c.scenario = resolve_scenario(f.scenario);
    if (f.exploit_prob >= 0.0) c.scenario.exploit_prob = f.exploit_prob;
    c.algorithm = parse_algorithm(f.algo);
    c.max_branch = f.max_branch;
    c.episodes = f.episodes;
    c.seed = f.seed;
    c.agent.trunk = f.trunk;
    c.agent.value_hidden = f.value_hidden;
    c.agent.learning_rate = f.lr;
    c.agent.gamma = f.gamma;
    c.agent.sync_period = f.sync_period;
    c.agent.double_dqn = f.double_dqn;
    c.agent.parallel = f.parallel;
    c.agent.max_grad_norm = f.max_grad_norm;
    c.agent.optimizer = f.sgd ? OptimizerKind::sgd : OptimizerKind::adam;
    c.batch_size = f.batch;
    c.buffer_capacity = f.buffer;
    c.learn_start = f.learn_start;
    c.train_every = f.train_every;
    c.epsilon = {f.eps_start, f.eps_end, f.eps_decay};
    c.eval_every = f.eval_every;
    c.eval_episodes = f.eval_episodes;
    c.output_dir = f.out;
    c.record_wall_time = f.wall_clock;
    return c;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical-agent action decomposition lab for a penetration-testing simulator", "hadrl"};
    app.require_subcommand(1);

    std::uint64_t plan_actions = 0;
    std::uint32_t plan_branch = 10;
    auto* plan = app.add_subcommand("plan", "print the mixed-radix plan for an action count");
    plan->add_option("--actions", plan_actions, "flat action count")->required();
    plan->add_option("--max-branch", plan_branch, "largest per-level radix")->capture_default_str();

    std::string scenario_ref = "tiny";
    auto* enumerate = app.add_subcommand("enumerate", "list the action catalog of a scenario");
    enumerate->add_option("--scenario", scenario_ref)->capture_default_str();

    std::size_t budget = 1'000'000;
    auto* oracle = app.add_subcommand("oracle", "shortest deterministic attack path");
    oracle->add_option("--scenario", scenario_ref)->capture_default_str();
    oracle->add_option("--budget", budget, "state budget")->capture_default_str();

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "train HA-DRL or the single-agent baseline");
    add_train_options(*train_cmd, tf);

    std::string checkpoint;
    std::uint64_t eval_episodes = 10, eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    eval->add_option("--scenario", scenario_ref)->capture_default_str();
    eval->add_option("--episodes", eval_episodes)->capture_default_str();
    eval->add_option("--seed", eval_seed)->capture_default_str();

    std::vector<std::string> runs_a, runs_b;
    double oracle_return = -1.0, fraction = 0.9;
    std::string summary_out;
    auto* cmp = app.add_subcommand("compare", "episodes-to-threshold across seeds for two algorithms");
    cmp->add_option("--a", runs_a, "run directories of the first algorithm")->required();
    cmp->add_option("--b", runs_b, "run directories of the second algorithm")->required();
    cmp->add_option("--oracle-return", oracle_return, "override the oracle's best return");
    cmp->add_option("--fraction", fraction, "threshold as a fraction of the oracle return")->capture_default_str();
    cmp->add_option("--out", summary_out, "summary file (default: stdout)");

    std::string dump_out;
    std::uint64_t dump_episodes = 1, dump_seed = 0;
    auto* dump = app.add_subcommand("dump-embeddings", "penultimate activations per visited state and agent");
    dump->add_option("--checkpoint", checkpoint)->required();
    dump->add_option("--scenario", scenario_ref)->capture_default_str();
    dump->add_option("--episodes", dump_episodes)->capture_default_str();
    dump->add_option("--seed", dump_seed)->capture_default_str();
    dump->add_option("--out", dump_out, "CSV file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*plan) {
            if (plan_actions < 1 || plan_branch < 2)
                throw UsageError("plan requires --actions >= 1 and --max-branch >= 2");
            out << format_plan(plan_decomposition(plan_actions, plan_branch)) << "\n";
        } else if (*enumerate) {
            PentestEnv env(resolve_scenario(scenario_ref));
            out << "total_actions=" << env.total_actions() << "\n";
            for (std::size_t i = 0; i < env.catalog().size(); ++i) {
                const auto& a = env.catalog()[i];
                out << i << ' ' << to_string(a.type) << ' ' << a.source << ' ' << a.target << "\n";
            }
        } else if (*oracle) {
            auto r = oracle_optimal(resolve_scenario(scenario_ref), budget);
            out << "min_steps=" << r.min_steps << " max_return=" << format_return(r.max_return) << "\n";
        } else if (*train_cmd) {
            auto cfg = to_run_config(tf);
            auto res = train(cfg);
            if (cfg.output_dir.empty()) {
                out << kMetricsHeader << "\n";
                for (const auto& m : res.history) out << to_csv_row(m) << "\n";
            }
            out << "final_greedy_return=" << detail::fmt_double(res.final_eval.mean_return)
                << " final_greedy_steps=" << detail::fmt_double(res.final_eval.mean_steps)
                << " agents=" << res.group.levels() << "\n";
        } else if (*eval) {
            auto group = AgentGroup::load(checkpoint);
            PentestEnv env(resolve_scenario(scenario_ref));
            if (group.plan().total_actions != env.total_actions())
                throw std::runtime_error("checkpoint was trained on a different action count");
            auto r = evaluate(env, group, eval_episodes, eval_seed);
            out << "mean_return=" << detail::fmt_double(r.mean_return)
                << " mean_steps=" << detail::fmt_double(r.mean_steps) << "\n";
        } else if (*cmp) {
            std::vector<RunRecord> a, b;
            for (const auto& d : runs_a) a.push_back(load_run(d));
            for (const auto& d : runs_b) b.push_back(load_run(d));
            if (oracle_return < 0.0) {
                ScenarioSpec spec = load_scenario_file(std::filesystem::path(runs_a.front()) / "scenario.scn");
                oracle_return = oracle_optimal(spec).max_return;
            }
            auto summary = compare(a, b, oracle_return, fraction);
            if (summary_out.empty()) {
                write_summary(out, summary);
            } else {
                std::ofstream f(summary_out);
                if (!f) throw std::runtime_error("cannot write " + summary_out);
                write_summary(f, summary);
            }
        } else if (*dump) {
            auto group = AgentGroup::load(checkpoint);
            PentestEnv env(resolve_scenario(scenario_ref));
            if (group.plan().total_actions != env.total_actions())
                throw std::runtime_error("checkpoint was trained on a different action count");
            if (dump_out.empty()) {
                dump_embeddings(out, group, env, dump_episodes, dump_seed);
            } else {
                std::ofstream f(dump_out);
                if (!f) throw std::runtime_error("cannot write " + dump_out);
                dump_embeddings(f, group, env, dump_episodes, dump_seed);
            }
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace hadrl::cli
