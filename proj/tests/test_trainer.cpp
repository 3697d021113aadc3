#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hadrl/trainer.hpp"

using namespace hadrl;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(std::uint64_t episodes, std::uint64_t seed = 3) {
    RunConfig cfg;
    cfg.scenario = load_preset("tiny");
    cfg.episodes = episodes;
    cfg.seed = seed;
    cfg.agent.trunk = {16};
    cfg.agent.value_hidden = 8;
    cfg.learn_start = 64;
    cfg.batch_size = 16;
    cfg.eval_every = 5;
    cfg.eval_episodes = 2;
    cfg.scenario.step_limit = 30;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunRecord fake_run(const std::string& scenario, std::uint64_t seed, std::vector<std::pair<std::uint64_t, double>> evals) {
    RunRecord r;
    r.scenario = scenario;
    r.algorithm = "hadrl";
    r.seed = seed;
    for (std::uint64_t ep = 1; ep <= 100; ++ep) {
        MetricsRecord m;
        m.episode = ep;
        for (const auto& [e, v] : evals)
            if (e == ep) m.eval_return = v;
        r.metrics.push_back(m);
    }
    return r;
}

}  // namespace

TEST(Epsilon, LinearThenFlat) {
    EpsilonSchedule s;
    EXPECT_DOUBLE_EQ(s.at(0, 1000), 1.0);
    EXPECT_DOUBLE_EQ(s.at(100, 1000), 0.525);
    EXPECT_DOUBLE_EQ(s.at(200, 1000), 0.05);
    EXPECT_DOUBLE_EQ(s.at(900, 1000), 0.05);
}

TEST(Train, ZeroEpisodesWritesHeaderOnly) {
    auto dir = fresh_dir("hadrl_train_zero");
    auto cfg = small_run(0);
    cfg.output_dir = dir;
    auto res = train(cfg);
    EXPECT_TRUE(res.history.empty());
    EXPECT_EQ(slurp(dir / "metrics.csv"), std::string(kMetricsHeader) + "\n");
    EXPECT_TRUE(fs::exists(dir / "checkpoint" / "manifest.txt"));
    // Untrained greedy policy on a zero-initialised-bias network still terminates at the step limit.
    EXPECT_LE(res.final_eval.mean_steps, 30.0);
    fs::remove_all(dir);
}

TEST(Train, MetricsRowsAndEvaluationCadence) {
    auto cfg = small_run(12);
    auto res = train(cfg);
    ASSERT_EQ(res.history.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) {
        const auto& r = res.history[i];
        EXPECT_EQ(r.episode, i + 1);
        EXPECT_EQ(r.eval_return.has_value(), r.episode % 5 == 0 || r.episode == 12) << r.episode;
        EXPECT_LE(r.steps, 30u);
        EXPECT_EQ(r.wall_ms, 0.0);
    }
    EXPECT_DOUBLE_EQ(res.history[0].epsilon, 1.0);
    EXPECT_FALSE(res.history[0].loss_mean.has_value());
    EXPECT_TRUE(res.history.back().loss_mean.has_value());
}

TEST(Train, SameSeedSameBytes) {
    auto d1 = fresh_dir("hadrl_det_a"), d2 = fresh_dir("hadrl_det_b");
    auto cfg = small_run(8, 11);
    cfg.output_dir = d1;
    train(cfg);
    cfg.output_dir = d2;
    train(cfg);
    EXPECT_EQ(slurp(d1 / "metrics.csv"), slurp(d2 / "metrics.csv"));
    EXPECT_EQ(slurp(d1 / "checkpoint" / "agent_0.bin"), slurp(d2 / "checkpoint" / "agent_0.bin"));
    auto back = read_metrics(d1 / "metrics.csv");
    EXPECT_EQ(back.size(), 8u);
    auto run = load_run(d1);
    EXPECT_EQ(run.scenario, "tiny");
    EXPECT_EQ(run.algorithm, "hadrl");
    EXPECT_EQ(run.seed, 11u);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Train, BaselineUsesOneWideHead) {
    auto cfg = small_run(2);
    cfg.algorithm = Algorithm::ddqn;
    auto res = train(cfg);
    ASSERT_EQ(res.group.levels(), 1u);
    EXPECT_EQ(res.group.agents()[0].action_count(), 84u);
    cfg.algorithm = Algorithm::hadrl;
    EXPECT_EQ(train(cfg).group.levels(), 2u);
}

TEST(Train, RejectsBadConfig) {
    auto cfg = small_run(2);
    cfg.eval_every = 0;
    EXPECT_THROW(train(cfg), ConfigError);
    cfg = small_run(2);
    cfg.scenario.flag_hosts.clear();
    EXPECT_THROW(train(cfg), ConfigError);
}

TEST(Csv, RowRoundTrip) {
    MetricsRecord r;
    r.episode = 7;
    r.episode_return = -0.3;
    r.steps = 12;
    r.epsilon = 0.5;
    r.eval_return = 10.0;
    r.eval_steps = 3.0;
    r.seed = 4;
    std::stringstream ss;
    ss << kMetricsHeader << "\n" << to_csv_row(r) << "\n";
    EXPECT_EQ(to_csv_row(r), "7,-0.3,12,0.5,,10,3,0,4");
    auto back = read_metrics(ss);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_FALSE(back[0].loss_mean.has_value());
    EXPECT_EQ(*back[0].eval_return, 10.0);
}

TEST(Evaluate, IsPureInTheGroup) {
    AgentConfig ac;
    ac.trunk = {8};
    PentestEnv env(load_preset("tiny"));
    auto g = build_hadrl(env.total_actions(), 10, env.observation_width(), ac, 5);
    const auto before = g.agents()[0].online;
    auto a = evaluate(env, g, 3, 9);
    auto b = evaluate(env, g, 3, 9);
    EXPECT_EQ(a.mean_return, b.mean_return);
    EXPECT_EQ(a.mean_steps, b.mean_steps);
    EXPECT_EQ(g.agents()[0].online, before);
    EXPECT_THROW(evaluate(env, g, 0, 9), std::invalid_argument);
}

TEST(Compare, MedianOfEpisodesToThreshold) {
    std::vector<RunRecord> a{fake_run("s", 1, {{10, 9.5}}), fake_run("s", 2, {{20, 9.0}}), fake_run("s", 3, {{30, 9.9}})};
    std::vector<RunRecord> b{fake_run("s", 1, {{50, 9.5}}), fake_run("s", 2, {{10, 1.0}}), fake_run("s", 3, {})};
    auto s = compare(a, b, 10.0);
    EXPECT_DOUBLE_EQ(s.threshold, 9.0);
    EXPECT_DOUBLE_EQ(s.a.median, 20.0);
    EXPECT_EQ(s.a.successes, 3u);
    EXPECT_TRUE(std::isinf(s.b.median));
    EXPECT_EQ(s.b.successes, 1u);
    std::ostringstream os;
    write_summary(os, s);
    EXPECT_NE(os.str().find("algorithm=hadrl successes=3/3 median=20"), std::string::npos) << os.str();
    EXPECT_NE(os.str().find("episodes=inf"), std::string::npos);
}

TEST(Compare, FirstCrossingWins) {
    auto r = fake_run("s", 1, {{10, 2.0}, {20, 9.5}, {30, 1.0}, {40, 9.8}});
    EXPECT_EQ(episodes_to_threshold(r.metrics, 9.0), 20u);
    EXPECT_EQ(episodes_to_threshold(r.metrics, 9.9), kNeverCrossed);
    EXPECT_DOUBLE_EQ(median_episodes({10, 30}), 20.0);
    EXPECT_TRUE(std::isinf(median_episodes({10, kNeverCrossed})));
}

TEST(Compare, RejectsMismatchedRuns) {
    std::vector<RunRecord> a{fake_run("s", 1, {})};
    EXPECT_THROW(compare(a, {fake_run("other", 1, {})}, 10.0), std::invalid_argument);
    EXPECT_THROW(compare(a, {fake_run("s", 2, {})}, 10.0), std::invalid_argument);
    EXPECT_THROW(compare(a, {}, 10.0), std::invalid_argument);
}

TEST(Embeddings, OneRowPerStatePerAgent) {
    AgentConfig ac;
    ac.trunk = {8};
    ac.value_hidden = 0;
    auto spec = load_preset("tiny");
    spec.step_limit = 7;
    PentestEnv env(spec);
    auto g = build_hadrl(env.total_actions(), 10, env.observation_width(), ac, 5);
    std::ostringstream os;
    auto rows = dump_embeddings(os, g, env, 2, 1);
    auto steps = evaluate(env, g, 1, 0).mean_steps;
    EXPECT_EQ(rows, 2u * static_cast<std::size_t>(steps) * g.levels());
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "agent,action,h0,h1,h2,h3,h4,h5,h6,h7");
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9);
    }
    EXPECT_EQ(n, rows);
}
