#pragma once

// Breadth-first search over the deterministic (exploit_prob = 1) transition
// graph. Self-loops, which include every invalid action, are never expanded,
// so a shortest path collects no penalties.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hadrl/errors.hpp"
#include "hadrl/pentest_env.hpp"
#include "hadrl/scenario.hpp"

namespace hadrl {

struct OracleResult {
    std::uint32_t min_steps = 0;
    double max_return = 0.0;  // best return among all shortest paths
    std::size_t states_explored = 0;
};

inline OracleResult oracle_optimal(ScenarioSpec spec, std::size_t state_budget = 1'000'000) {
    spec.exploit_prob = 1.0;
    validate(spec);
    const auto catalog = enumerate_actions(spec);
    auto always = [] { return true; };

    struct Node {
        EnvState state;
        double ret;
    };
    std::unordered_map<std::string, std::size_t> seen;  // key -> depth
    std::vector<Node> frontier{{initial_state(spec), 0.0}};
    seen.emplace(frontier[0].state.key(), 0);

    for (std::uint32_t depth = 0;; ++depth) {
        if (frontier.empty())
            throw UnreachableError("scenario '" + spec.name + "': flags are unreachable from the foothold");
        std::vector<Node> next;
        std::unordered_map<std::string, std::size_t> next_index;
        bool goal_found = false;
        double best_goal = 0.0;

        for (const auto& node : frontier) {
            const std::string here = node.state.key();
            for (const auto& a : catalog) {
                EnvState st = node.state;
                auto tr = apply_action(spec, st, a, always);
                if (tr.outcome != Outcome::applied) continue;
                std::string k = st.key();
                if (k == here) continue;
                const double ret = node.ret + tr.reward;
                if (st.all_flags_captured()) {
                    best_goal = goal_found ? std::max(best_goal, ret) : ret;
                    goal_found = true;
                    continue;
                }
                if (goal_found) continue;  // deeper layers are no longer needed
                if (auto it = next_index.find(k); it != next_index.end()) {
                    next[it->second].ret = std::max(next[it->second].ret, ret);
                    continue;
                }
                if (seen.contains(k)) continue;
                seen.emplace(k, depth + 1);
                if (seen.size() > state_budget)
                    throw ResourceError("oracle state budget of " + std::to_string(state_budget) + " exceeded");
                next_index.emplace(std::move(k), next.size());
                next.push_back({std::move(st), ret});
            }
        }
        if (goal_found) return OracleResult{depth + 1, best_goal, seen.size()};
        frontier = std::move(next);
    }
}

}  // namespace hadrl
