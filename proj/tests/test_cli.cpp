#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hadrl/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation call(std::vector<std::string> args) {
    args.insert(args.begin(), "hadrl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = hadrl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<std::string> kSmallTrain = {"--scenario", "tiny", "--trunk", "16", "--value-hidden", "8",
                                              "--learn-start", "32", "--batch", "8", "--eval-every", "2",
                                              "--eval-episodes", "1"};

std::vector<std::string> train_args(std::vector<std::string> extra) {
    std::vector<std::string> a{"train"};
    a.insert(a.end(), kSmallTrain.begin(), kSmallTrain.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

}  // namespace

TEST(Cli, PlanOutput) {
    auto r = call({"plan", "--actions", "1000", "--max-branch", "10"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "levels=3 radices=10,10,10 capacity=1000\n");
    EXPECT_EQ(call({"plan", "--actions", "4646"}).out, "levels=4 radices=9,9,9,7 capacity=5103\n");
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(call({"plan", "--actions", "0"}).code, 2);
    EXPECT_EQ(call({"plan"}).code, 2);
    EXPECT_EQ(call({"bogus"}).code, 2);
    EXPECT_EQ(call({}).code, 2);
    EXPECT_EQ(call({"train", "--algo", "sarsa"}).code, 2);
    auto missing = call({"oracle", "--scenario", "/nonexistent/file.scn"});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("error"), std::string::npos);
    EXPECT_EQ(call({"oracle", "--scenario", "s16", "--budget", "5"}).code, 1);
}

TEST(Cli, OracleOutput) {
    auto r = call({"oracle", "--scenario", "tiny"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "min_steps=3 max_return=10.0\n");
}

TEST(Cli, EnumerateListsCatalog) {
    auto r = call({"enumerate", "--scenario", "tiny"});
    EXPECT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "total_actions=84");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 84u);
}

TEST(Cli, TrainZeroEpisodesHeaderOnly) {
    auto dir = fs::temp_directory_path() / "hadrl_cli_zero";
    fs::remove_all(dir);
    auto r = call(train_args({"--episodes", "0", "--out", dir.string()}));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "metrics.csv"), "episode,return,steps,epsilon,loss_mean,eval_return,eval_steps,wall_ms,seed\n");
    EXPECT_NE(r.out.find("agents=2"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, BaselineHasOneAgent) {
    auto r = call(train_args({"--episodes", "1", "--algo", "ddqn"}));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("agents=1"), std::string::npos);
    EXPECT_EQ(r.out.rfind("episode,return", 0), 0u);
}

TEST(Cli, TrainEvalCompareDumpPipeline) {
    auto base = fs::temp_directory_path() / "hadrl_cli_pipeline";
    fs::remove_all(base);
    for (const char* algo : {"hadrl", "ddqn"})
        for (const char* seed : {"1", "2"}) {
            auto d = base / (std::string(algo) + seed);
            auto r = call(train_args({"--episodes", "4", "--algo", algo, "--seed", seed, "--out", d.string()}));
            ASSERT_EQ(r.code, 0) << r.err;
        }
    auto twice = call(train_args({"--episodes", "4", "--seed", "1", "--out", (base / "again").string()}));
    ASSERT_EQ(twice.code, 0);
    EXPECT_EQ(slurp(base / "hadrl1" / "metrics.csv"), slurp(base / "again" / "metrics.csv"));

    auto ev = call({"eval", "--checkpoint", (base / "hadrl1" / "checkpoint").string(), "--scenario", "tiny",
                    "--episodes", "2"});
    EXPECT_EQ(ev.code, 0) << ev.err;
    EXPECT_EQ(ev.out.rfind("mean_return=", 0), 0u);
    EXPECT_EQ(call({"eval", "--checkpoint", (base / "hadrl1" / "checkpoint").string(), "--scenario", "s6"}).code, 1);

    auto cmp = call({"compare", "--a", (base / "hadrl1").string(), (base / "hadrl2").string(), "--b",
                     (base / "ddqn1").string(), (base / "ddqn2").string()});
    EXPECT_EQ(cmp.code, 0) << cmp.err;
    EXPECT_NE(cmp.out.find("scenario=tiny\nthreshold=9\n"), std::string::npos) << cmp.out;
    EXPECT_NE(cmp.out.find("algorithm=ddqn successes="), std::string::npos);
    auto bad = call({"compare", "--a", (base / "hadrl1").string(), "--b", (base / "ddqn2").string()});
    EXPECT_EQ(bad.code, 1);

    auto dump = call({"dump-embeddings", "--checkpoint", (base / "hadrl1" / "checkpoint").string(), "--scenario",
                      "tiny"});
    EXPECT_EQ(dump.code, 0) << dump.err;
    EXPECT_EQ(dump.out.rfind("agent,action,h0,", 0), 0u);
    fs::remove_all(base);
}
