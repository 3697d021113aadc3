#pragma once

// Seedable penetration-testing MDP.
//
// Action ids are assigned in this order, starting at 0:
//
//   host-to-host   for type in {ServiceScan, ExploitSSH}[:m]
//                    for src in hosts, for tgt in hosts \ {src}
//   host-to-subnet for type in {SubnetScan}[:n]
//                    for src in hosts, for subnet in subnets
//   on-host        for type in {OSInfo, PassiveObserve}[:o]
//                    for host in hosts
//
// Ids at or beyond total_actions() (the decomposition dead zone) are
// accepted by step() and treated as invalid actions.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hadrl/action_algebra.hpp"
#include "hadrl/errors.hpp"
#include "hadrl/scenario.hpp"

namespace hadrl {

enum class ActionType : std::uint8_t { service_scan, exploit_ssh, subnet_scan, os_info, passive_observe };

inline std::string_view to_string(ActionType t) {
    switch (t) {
        case ActionType::service_scan: return "ServiceScan";
        case ActionType::exploit_ssh: return "ExploitSSH";
        case ActionType::subnet_scan: return "SubnetScan";
        case ActionType::os_info: return "OSInfo";
        case ActionType::passive_observe: return "PassiveObserve";
    }
    return "?";
}

/// `target` is a host for host-to-host types, a subnet for SubnetScan, and
/// equals `source` for on-host types.
struct ActionSpec {
    ActionType type;
    std::uint32_t source;
    std::uint32_t target;
    bool operator==(const ActionSpec&) const = default;
};

inline std::vector<ActionSpec> enumerate_actions(const ScenarioSpec& s) {
    static constexpr ActionType h2h[] = {ActionType::service_scan, ActionType::exploit_ssh};
    static constexpr ActionType on_host[] = {ActionType::os_info, ActionType::passive_observe};
    std::vector<ActionSpec> out;
    out.reserve(s.closed_form_action_count());
    for (std::uint32_t t = 0; t < s.host_to_host_types; ++t)
        for (std::uint32_t src = 0; src < s.hosts; ++src)
            for (std::uint32_t tgt = 0; tgt < s.hosts; ++tgt)
                if (tgt != src) out.push_back({h2h[t], src, tgt});
    for (std::uint32_t t = 0; t < s.host_to_subnet_types; ++t)
        for (std::uint32_t src = 0; src < s.hosts; ++src)
            for (std::uint32_t sn = 0; sn < s.subnets; ++sn) out.push_back({ActionType::subnet_scan, src, sn});
    for (std::uint32_t t = 0; t < s.on_host_types; ++t)
        for (std::uint32_t h = 0; h < s.hosts; ++h) out.push_back({on_host[t], h, h});
    return out;
}

struct EnvState {
    std::vector<std::uint8_t> discovered;
    std::vector<std::uint8_t> service_scanned;
    std::vector<std::uint8_t> os_known;
    std::vector<std::uint8_t> compromised;
    std::vector<std::uint8_t> reachable;  // per subnet
    std::vector<std::uint8_t> flag_captured;  // parallel to ScenarioSpec::flag_hosts
    std::uint32_t steps = 0;
    bool terminal = false;

    bool operator==(const EnvState&) const = default;

    /// Knowledge bits only (no step counter); used as a search key.
    std::string key() const {
        std::string k(discovered.size() + reachable.size(), '\0');
        for (std::size_t h = 0; h < discovered.size(); ++h)
            k[h] = static_cast<char>(discovered[h] | service_scanned[h] << 1 | os_known[h] << 2 | compromised[h] << 3);
        for (std::size_t i = 0; i < reachable.size(); ++i) k[discovered.size() + i] = static_cast<char>(reachable[i]);
        return k;
    }

    bool all_flags_captured() const {
        for (auto c : flag_captured)
            if (!c) return false;
        return true;
    }
};

using Observation = std::vector<double>;

enum class Outcome : std::uint8_t { applied, invalid, exploit_failed };

struct TransitionResult {
    Outcome outcome = Outcome::invalid;
    double reward = 0.0;
    bool flag_captured = false;
};

/// Initial state: only the foothold is known and compromised, and only its
/// subnet is reachable.
inline EnvState initial_state(const ScenarioSpec& s) {
    EnvState st;
    st.discovered.assign(s.hosts, 0);
    st.service_scanned.assign(s.hosts, 0);
    st.os_known.assign(s.hosts, 0);
    st.compromised.assign(s.hosts, 0);
    st.reachable.assign(s.subnets, 0);
    st.flag_captured.assign(s.flag_hosts.size(), 0);
    st.discovered[s.foothold] = 1;
    st.compromised[s.foothold] = 1;
    st.reachable[s.subnet_of[s.foothold]] = 1;
    return st;
}

/// Applies one catalog action to `st` (knowledge bits only; the step counter
/// and terminal flag are the caller's). `exploit_succeeds` is consulted only
/// when an exploit's preconditions hold.
template <typename SuccessFn>
TransitionResult apply_action(const ScenarioSpec& s, EnvState& st, const ActionSpec& a, SuccessFn&& exploit_succeeds) {
    TransitionResult r;
    auto invalid = [&] {
        r.outcome = Outcome::invalid;
        r.reward = s.rewards.invalid;
        return r;
    };
    if (!st.compromised[a.source]) return invalid();
    const std::uint32_t src_subnet = s.subnet_of[a.source];

    switch (a.type) {
        case ActionType::subnet_scan: {
            if (!s.adjacent(src_subnet, a.target)) return invalid();
            for (std::uint32_t h = 0; h < s.hosts; ++h)
                if (s.subnet_of[h] == a.target) st.discovered[h] = 1;
            st.reachable[a.target] = 1;
            break;
        }
        case ActionType::service_scan: {
            if (!st.discovered[a.target]) return invalid();
            st.service_scanned[a.target] = 1;
            break;
        }
        case ActionType::exploit_ssh: {
            if (!st.service_scanned[a.target] || st.compromised[a.target]) return invalid();
            if (!s.adjacent(src_subnet, s.subnet_of[a.target])) return invalid();
            if (!exploit_succeeds()) {
                r.outcome = Outcome::exploit_failed;
                r.reward = s.rewards.failed_exploit;
                return r;
            }
            st.compromised[a.target] = 1;
            st.discovered[a.target] = 1;
            r.reward = s.rewards.pivot;
            for (std::size_t f = 0; f < s.flag_hosts.size(); ++f) {
                if (s.flag_hosts[f] == a.target && !st.flag_captured[f]) {
                    st.flag_captured[f] = 1;
                    r.reward = s.rewards.flag;
                    r.flag_captured = true;
                }
            }
            break;
        }
        case ActionType::os_info: st.os_known[a.source] = 1; break;
        case ActionType::passive_observe: {
            for (std::uint32_t h = 0; h < s.hosts; ++h)
                if (s.subnet_of[h] == src_subnet) st.discovered[h] = 1;
            break;
        }
    }
    r.outcome = Outcome::applied;
    return r;
}

struct StepInfo {
    Outcome outcome = Outcome::invalid;
    bool flag_captured = false;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

class PentestEnv {
public:
    explicit PentestEnv(ScenarioSpec spec) : spec_(std::move(spec)) {
        validate(spec_);
        catalog_ = enumerate_actions(spec_);
        state_ = initial_state(spec_);
    }

    const ScenarioSpec& scenario() const { return spec_; }
    const std::vector<ActionSpec>& catalog() const { return catalog_; }
    const EnvState& state() const { return state_; }
    ActionId total_actions() const { return catalog_.size(); }
    std::size_t observation_width() const { return 4 * spec_.hosts + spec_.subnets; }

    Observation reset(std::uint64_t seed) {
        rng_.seed(seed);
        state_ = initial_state(spec_);
        return observe();
    }

    StepResult step(ActionId action) {
        if (state_.terminal) throw ContractError("step() called on a finished episode; call reset()");
        StepResult out;
        if (action >= catalog_.size()) {
            out.reward = spec_.rewards.invalid;
            out.info.outcome = Outcome::invalid;
        } else {
            auto tr = apply_action(spec_, state_, catalog_[action], [this] {
                return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < spec_.exploit_prob;
            });
            out.reward = tr.reward;
            out.info.outcome = tr.outcome;
            out.info.flag_captured = tr.flag_captured;
        }
        ++state_.steps;
        state_.terminal = state_.all_flags_captured() || state_.steps >= spec_.step_limit;
        out.done = state_.terminal;
        out.observation = observe();
        return out;
    }

    /// 4 bits per host (discovered, service_scanned, os_known, compromised),
    /// then one reachable bit per subnet. Flag locations never appear.
    Observation observe() const {
        Observation o(observation_width(), 0.0);
        for (std::uint32_t h = 0; h < spec_.hosts; ++h) {
            o[4 * h + 0] = state_.discovered[h];
            o[4 * h + 1] = state_.service_scanned[h];
            o[4 * h + 2] = state_.os_known[h];
            o[4 * h + 3] = state_.compromised[h];
        }
        for (std::uint32_t i = 0; i < spec_.subnets; ++i) o[4 * spec_.hosts + i] = state_.reachable[i];
        return o;
    }

private:
    ScenarioSpec spec_;
    std::vector<ActionSpec> catalog_;
    EnvState state_;
    std::mt19937_64 rng_{0};
};

/// Upper bound on an episode's return: every flag plus a pivot bonus for
/// every other non-foothold host.
inline double return_upper_bound(const ScenarioSpec& s) {
    const double flags = static_cast<double>(s.flag_hosts.size());
    return s.rewards.flag * flags + s.rewards.pivot * (static_cast<double>(s.hosts) - flags - 1.0);
}

}  // namespace hadrl
