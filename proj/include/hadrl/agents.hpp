#pragma once

// One dueling DQN learner per decomposition level, a shared replay buffer,
// and the single-agent baseline (a group with one level).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hadrl/action_algebra.hpp"
#include "hadrl/errors.hpp"
#include "hadrl/nn_core.hpp"
#include "hadrl/pentest_env.hpp"

namespace hadrl {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; derives independent seeds from (seed, stream).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct AgentConfig {
    std::vector<std::size_t> trunk{128, 128};
    std::size_t value_hidden = 64;
    double learning_rate = 1e-4;
    double gamma = 0.99;
    std::uint64_t sync_period = 1000;
    OptimizerKind optimizer = OptimizerKind::adam;
    bool double_dqn = false;     // off: plain max over the target network
    double max_grad_norm = 0.0;  // 0 disables clipping
    bool parallel = false;       // run per-level updates on separate threads
};

struct Agent {
    std::size_t level = 0;
    QNetwork online;
    TargetNetwork target;
    OptimizerState optimizer;
    std::uint64_t updates = 0;

    std::size_t action_count() const { return online.architecture().action_count; }
};

struct Transition {
    Observation state;
    PrimitiveActionVector primitive;
    ActionId composed = 0;
    double reward = 0.0;
    Observation next_state;
    bool terminal = false;
};

/// Ring buffer with FIFO eviction. Pointers returned by sample() stay valid
/// until the next push().
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("replay capacity must be >= 1");
        items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
    }

    /// Rejects transitions whose primitive digits do not compose to the
    /// recorded action under `plan`.
    void push(const DecompositionPlan& plan, Transition t) {
        if (compose(plan, t.primitive) != t.composed)
            throw std::invalid_argument("transition primitive actions do not compose to the recorded action");
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
    }

    /// Uniform with replacement; nullopt while fewer than batch_size items are stored.
    std::optional<std::vector<const Transition*>> sample(std::size_t batch_size, Rng& rng) const {
        if (batch_size == 0 || items_.size() < batch_size) return std::nullopt;
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        std::vector<const Transition*> out(batch_size);
        for (auto& p : out) p = &items_[pick(rng)];
        return out;
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// Oldest first.
    std::vector<const Transition*> contents() const {
        std::vector<const Transition*> out;
        const std::size_t n = items_.size();
        const std::size_t start = n < capacity_ ? 0 : cursor_;
        for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[(start + i) % n]);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> items_;
};

using Batch = std::vector<const Transition*>;

/// Lowest index wins ties.
inline std::uint32_t argmax(std::span<const double> q) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = i;
    return best;
}

inline std::uint32_t select_primitive(const Agent& agent, const Observation& state, double epsilon, Rng& rng) {
    if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(agent.action_count() - 1));
        return pick(rng);
    }
    auto q = forward(agent.online, state);
    return argmax(q);
}

inline std::vector<double> td_targets(const Agent& agent, const Batch& batch, double gamma) {
    std::vector<double> y(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& t = *batch[b];
        if (t.terminal || gamma == 0.0) {
            y[b] = t.reward;
            continue;
        }
        auto q_next = forward(agent.target, t.next_state);
        y[b] = t.reward + gamma * *std::max_element(q_next.begin(), q_next.end());
    }
    return y;
}

/// Target action from the online net, value from the target net.
inline std::vector<double> double_dqn_targets(const Agent& agent, const Batch& batch, double gamma) {
    std::vector<double> y(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& t = *batch[b];
        if (t.terminal || gamma == 0.0) {
            y[b] = t.reward;
            continue;
        }
        auto a = argmax(forward(agent.online, t.next_state));
        y[b] = t.reward + gamma * forward(agent.target, t.next_state)[a];
    }
    return y;
}

/// One gradient step on the agent's own primitive actions from a shared
/// batch. Returns the pre-update loss.
inline double update(Agent& agent, const Batch& batch, const AgentConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    auto targets = cfg.double_dqn ? double_dqn_targets(agent, batch, cfg.gamma) : td_targets(agent, batch, cfg.gamma);
    Matrix states(batch.size(), agent.online.architecture().input_width);
    std::vector<std::uint32_t> actions(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = batch[b]->state;
        if (s.size() != states.cols) throw std::invalid_argument("state width mismatch in batch");
        std::copy(s.begin(), s.end(), states.row(b).begin());
        actions[b] = batch[b]->primitive.digits.at(agent.level);
    }
    auto lg = td_loss_and_grads(agent.online, states, actions, targets);
    if (cfg.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (double g : lg.grads) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg.max_grad_norm)
            for (double& g : lg.grads) g *= cfg.max_grad_norm / norm;
    }
    optimizer_step(agent.online, lg.grads, agent.optimizer, cfg.learning_rate);
    ++agent.updates;
    if (cfg.sync_period > 0 && agent.updates % cfg.sync_period == 0) sync_target(agent.online, agent.target);
    return lg.loss;
}

class AgentGroup {
public:
    AgentGroup() = default;

    AgentGroup(DecompositionPlan plan, std::size_t input_width, AgentConfig cfg, std::uint64_t seed)
        : plan_(std::move(plan)), cfg_(std::move(cfg)) {
        for (std::size_t i = 0; i < plan_.levels(); ++i) {
            Architecture arch{input_width, cfg_.trunk, cfg_.value_hidden, plan_.radices[i]};
            Agent a;
            a.level = i;
            a.online = init_network(arch, mix_seed(seed, i));
            a.target = TargetNetwork(a.online);
            a.optimizer.kind = cfg_.optimizer;
            agents_.push_back(std::move(a));
            agent_rngs_.emplace_back(mix_seed(seed, 1000 + i));
        }
    }

    const DecompositionPlan& plan() const { return plan_; }
    const AgentConfig& config() const { return cfg_; }
    std::vector<Agent>& agents() { return agents_; }
    const std::vector<Agent>& agents() const { return agents_; }
    std::size_t levels() const { return agents_.size(); }

    double epsilon() const { return epsilon_; }
    void set_epsilon(double e) { epsilon_ = e; }

    /// Levels are queried in order. Serialized mode draws from `rng`;
    /// parallel mode draws from each agent's own seeded sub-stream.
    std::pair<PrimitiveActionVector, ActionId> select_joint(const Observation& state, double epsilon, Rng& rng) {
        PrimitiveActionVector v;
        v.digits.resize(agents_.size());
        for (std::size_t i = 0; i < agents_.size(); ++i)
            v.digits[i] = select_primitive(agents_[i], state, epsilon, cfg_.parallel ? agent_rngs_[i] : rng);
        return {v, compose(plan_, v)};
    }

    /// Greedy joint action; touches no random state.
    std::pair<PrimitiveActionVector, ActionId> greedy(const Observation& state) const {
        PrimitiveActionVector v;
        v.digits.resize(agents_.size());
        for (std::size_t i = 0; i < agents_.size(); ++i) v.digits[i] = argmax(forward(agents_[i].online, state));
        return {v, compose(plan_, v)};
    }

    /// Updates every level on the same batch; returns per-level losses.
    std::vector<double> update_all(const Batch& batch) {
        std::vector<double> losses(agents_.size());
        if (cfg_.parallel && agents_.size() > 1) {
            std::vector<std::jthread> workers;
            std::vector<std::exception_ptr> errors(agents_.size());
            for (std::size_t i = 0; i < agents_.size(); ++i)
                workers.emplace_back([&, i] {
                    try {
                        losses[i] = update(agents_[i], batch, cfg_);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                });
            workers.clear();
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
        } else {
            for (std::size_t i = 0; i < agents_.size(); ++i) losses[i] = update(agents_[i], batch, cfg_);
        }
        return losses;
    }

    // Checkpoint directory: agent_<i>.bin per level plus manifest.txt.
    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        for (const auto& a : agents_) save_network((dir / ("agent_" + std::to_string(a.level) + ".bin")).string(), a.online);
        std::ofstream m(dir / "manifest.txt");
        if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
        m << "hadrl-checkpoint 1\n";
        m << "total_actions " << plan_.total_actions << "\n";
        m << "radices";
        for (std::size_t i = 0; i < plan_.radices.size(); ++i) m << (i ? "," : " ") << plan_.radices[i];
        m << "\n";
        m.precision(17);
        m << "gamma " << cfg_.gamma << "\n";
        m << "epsilon " << epsilon_ << "\n";
        m << "updates";
        for (std::size_t i = 0; i < agents_.size(); ++i) m << (i ? "," : " ") << agents_[i].updates;
        m << "\n";
        m << "sync_period " << cfg_.sync_period << "\n";
    }

    static AgentGroup load(const std::filesystem::path& dir) {
        std::ifstream m(dir / "manifest.txt");
        if (!m) throw std::runtime_error("missing manifest.txt in " + dir.string());
        std::string header;
        std::getline(m, header);
        if (header != "hadrl-checkpoint 1") throw std::runtime_error("unsupported checkpoint manifest");
        AgentGroup g;
        ActionId total = 0;
        std::vector<std::uint32_t> radices;
        std::vector<std::uint64_t> updates;
        std::string key;
        while (m >> key) {
            std::string value;
            m >> value;
            auto split = [&](auto conv) {
                std::stringstream ss(value);
                std::string item;
                std::vector<decltype(conv(std::string{}))> out;
                while (std::getline(ss, item, ',')) out.push_back(conv(item));
                return out;
            };
            if (key == "total_actions") total = std::stoull(value);
            else if (key == "radices")
                radices = split([](const std::string& s) { return static_cast<std::uint32_t>(std::stoul(s)); });
            else if (key == "gamma") g.cfg_.gamma = std::stod(value);
            else if (key == "epsilon") g.epsilon_ = std::stod(value);
            else if (key == "updates")
                updates = split([](const std::string& s) { return static_cast<std::uint64_t>(std::stoull(s)); });
            else if (key == "sync_period") g.cfg_.sync_period = std::stoull(value);
            else throw std::runtime_error("unknown manifest key '" + key + "'");
        }
        g.plan_ = make_plan(total, radices);
        for (std::size_t i = 0; i < radices.size(); ++i) {
            Agent a;
            a.level = i;
            a.online = load_network((dir / ("agent_" + std::to_string(i) + ".bin")).string());
            if (a.online.architecture().action_count != radices[i])
                throw std::runtime_error("agent " + std::to_string(i) + " head width disagrees with manifest radix");
            a.target = TargetNetwork(a.online);
            a.updates = i < updates.size() ? updates[i] : 0;
            g.agents_.push_back(std::move(a));
            g.agent_rngs_.emplace_back(mix_seed(0, 1000 + i));
        }
        if (!g.agents_.empty()) {
            const auto& arch = g.agents_[0].online.architecture();
            g.cfg_.trunk = arch.trunk;
            g.cfg_.value_hidden = arch.value_hidden;
        }
        return g;
    }

private:
    DecompositionPlan plan_;
    AgentConfig cfg_;
    std::vector<Agent> agents_;
    std::vector<Rng> agent_rngs_;
    double epsilon_ = 1.0;
};

/// Balanced multi-level group over `total_actions`.
inline AgentGroup build_hadrl(ActionId total_actions, std::uint32_t max_branch, std::size_t input_width,
                              AgentConfig cfg, std::uint64_t seed) {
    return AgentGroup(plan_decomposition(total_actions, max_branch), input_width, std::move(cfg), seed);
}

/// Single dueling DQN over the whole action space: the L = 1 group.
inline AgentGroup build_baseline(ActionId action_count, std::size_t input_width, AgentConfig cfg, std::uint64_t seed) {
    if (action_count < 1) throw std::invalid_argument("action_count must be >= 1");
    return AgentGroup(make_plan(action_count, {static_cast<std::uint32_t>(action_count)}), input_width, std::move(cfg),
                      seed);
}

}  // namespace hadrl
