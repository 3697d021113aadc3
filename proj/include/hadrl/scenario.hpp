#pragma once

// Scenario description, validation, the line-oriented config format and the
// embedded preset library.
//
// Config format:
//
//     # comment
//     [network]
//     hosts = 6
//     subnets = 2
//     subnet_of = 0,0,0,1,1,1
//     adjacency = 0-1;1-2        # undirected pairs; omitted -> chain
//     layout = star              # alternative to adjacency: chain | star
//     [flags]
//     hosts = 4
//     [agent]
//     foothold = 0
//     [dynamics]
//     exploit_prob = 0.9
//     step_limit = 500
//     [actions]
//     m = 2
//     n = 1
//     o = 2
//     [rewards]                  # optional
//     flag = 10
//     pivot = 0.2
//     invalid = -0.1
//     failed_exploit = 0
//
// Unknown sections and keys are errors.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hadrl/errors.hpp"

namespace hadrl {

struct Rewards {
    double flag = 10.0;
    double pivot = 0.2;
    double invalid = -0.1;
    double failed_exploit = 0.0;
};

struct ScenarioSpec {
    std::string name = "custom";
    std::uint32_t hosts = 0;
    std::uint32_t subnets = 0;
    std::vector<std::uint32_t> subnet_of;
    std::vector<std::vector<bool>> adjacency;  // subnets x subnets
    std::vector<std::uint32_t> flag_hosts;
    std::uint32_t foothold = 0;
    double exploit_prob = 0.9;
    std::uint32_t step_limit = 500;
    std::uint32_t host_to_host_types = 2;    // m
    std::uint32_t host_to_subnet_types = 1;  // n
    std::uint32_t on_host_types = 2;         // o
    Rewards rewards;

    /// m*p*(p-1) + n*p*q + o*p
    std::uint64_t closed_form_action_count() const {
        const std::uint64_t p = hosts, q = subnets;
        return host_to_host_types * p * (p == 0 ? 0 : p - 1) + host_to_subnet_types * p * q + on_host_types * p;
    }

    bool adjacent(std::uint32_t a, std::uint32_t b) const { return adjacency[a][b]; }
    bool is_flag(std::uint32_t host) const {
        return std::find(flag_hosts.begin(), flag_hosts.end(), host) != flag_hosts.end();
    }
};

inline std::vector<std::vector<bool>> chain_adjacency(std::uint32_t subnets) {
    std::vector<std::vector<bool>> adj(subnets, std::vector<bool>(subnets, false));
    for (std::uint32_t i = 0; i < subnets; ++i) {
        adj[i][i] = true;
        if (i + 1 < subnets) adj[i][i + 1] = adj[i + 1][i] = true;
    }
    return adj;
}

/// Subnet 0 is the hub.
inline std::vector<std::vector<bool>> star_adjacency(std::uint32_t subnets) {
    std::vector<std::vector<bool>> adj(subnets, std::vector<bool>(subnets, false));
    for (std::uint32_t i = 0; i < subnets; ++i) {
        adj[i][i] = true;
        adj[0][i] = adj[i][0] = true;
    }
    return adj;
}

/// Throws ConfigError naming the first violated invariant.
inline void validate(const ScenarioSpec& s) {
    auto fail = [](const std::string& what) { throw ConfigError("invalid scenario: " + what); };
    if (s.hosts == 0) fail("hosts must be >= 1");
    if (s.subnets == 0) fail("subnets must be >= 1");
    if (s.subnet_of.size() != s.hosts) fail("subnet_of must list exactly one subnet per host");
    for (auto sn : s.subnet_of)
        if (sn >= s.subnets) fail("subnet_of references subnet " + std::to_string(sn) + " out of range");
    if (s.adjacency.size() != s.subnets) fail("adjacency must be subnets x subnets");
    for (std::uint32_t i = 0; i < s.subnets; ++i) {
        if (s.adjacency[i].size() != s.subnets) fail("adjacency must be subnets x subnets");
        if (!s.adjacency[i][i]) fail("adjacency must be reflexive (subnet " + std::to_string(i) + ")");
    }
    for (std::uint32_t i = 0; i < s.subnets; ++i)
        for (std::uint32_t j = 0; j < s.subnets; ++j)
            if (s.adjacency[i][j] != s.adjacency[j][i])
                fail("adjacency must be symmetric (" + std::to_string(i) + "," + std::to_string(j) + ")");
    if (s.foothold >= s.hosts) fail("foothold out of range");
    if (s.flag_hosts.empty()) fail("flag_hosts must be non-empty");
    for (auto f : s.flag_hosts) {
        if (f >= s.hosts) fail("flag host " + std::to_string(f) + " out of range");
        if (f == s.foothold) fail("foothold must not be a flag host");
    }
    auto sorted = s.flag_hosts;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("duplicate flag host");
    if (!(s.exploit_prob > 0.0 && s.exploit_prob <= 1.0)) fail("exploit_prob must be in (0, 1]");
    if (s.step_limit == 0) fail("step_limit must be >= 1");
    if (s.host_to_host_types > 2) fail("m must be <= 2 (ServiceScan, ExploitSSH)");
    if (s.host_to_subnet_types > 1) fail("n must be <= 1 (SubnetScan)");
    if (s.on_host_types > 2) fail("o must be <= 2 (OSInfo, PassiveObserve)");
    if (s.closed_form_action_count() == 0) fail("scenario has no actions");
}

namespace detail {

inline std::string trim(std::string_view v) {
    auto b = v.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = v.find_last_not_of(" \t\r");
    return std::string(v.substr(b, e - b + 1));
}

inline std::uint32_t parse_uint(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        x = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected non-negative integer, got '" + v + "'");
    }
    if (pos != v.size() || v.front() == '-' || x > 0xffffffffULL)
        throw ConfigError("key '" + key + "': expected non-negative integer, got '" + v + "'");
    return static_cast<std::uint32_t>(x);
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    return x;
}

inline std::vector<std::uint32_t> parse_uint_list(const std::string& key, const std::string& v) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
    return out;
}

}  // namespace detail

inline ScenarioSpec parse_scenario(std::istream& in, std::string name = "custom") {
    ScenarioSpec s;
    s.name = std::move(name);
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    std::string adjacency_text;
    std::string layout;
    bool have_hosts = false, have_subnets = false, have_subnet_of = false, have_flags = false;

    static const std::map<std::string, std::vector<std::string>> known = {
        {"network", {"hosts", "subnets", "subnet_of", "adjacency", "layout"}},
        {"flags", {"hosts"}},
        {"agent", {"foothold"}},
        {"dynamics", {"exploit_prob", "step_limit"}},
        {"actions", {"m", "n", "o"}},
        {"rewards", {"flag", "pivot", "invalid", "failed_exploit"}},
    };

    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where + "malformed section header");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            if (!known.contains(section)) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        std::string key = detail::trim(std::string_view(t).substr(0, eq));
        std::string val = detail::trim(std::string_view(t).substr(eq + 1));
        if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
        const auto& keys = known.at(section);
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        const std::string qualified = section + "." + key;

        if (section == "network") {
            if (key == "hosts") s.hosts = detail::parse_uint(qualified, val), have_hosts = true;
            else if (key == "subnets") s.subnets = detail::parse_uint(qualified, val), have_subnets = true;
            else if (key == "subnet_of") s.subnet_of = detail::parse_uint_list(qualified, val), have_subnet_of = true;
            else if (key == "adjacency") adjacency_text = val;
            else if (key == "layout") layout = val;
        } else if (section == "flags") {
            s.flag_hosts = detail::parse_uint_list(qualified, val);
            have_flags = true;
        } else if (section == "agent") {
            s.foothold = detail::parse_uint(qualified, val);
        } else if (section == "dynamics") {
            if (key == "exploit_prob") s.exploit_prob = detail::parse_double(qualified, val);
            else s.step_limit = detail::parse_uint(qualified, val);
        } else if (section == "actions") {
            auto v = detail::parse_uint(qualified, val);
            if (key == "m") s.host_to_host_types = v;
            else if (key == "n") s.host_to_subnet_types = v;
            else s.on_host_types = v;
        } else if (section == "rewards") {
            auto v = detail::parse_double(qualified, val);
            if (key == "flag") s.rewards.flag = v;
            else if (key == "pivot") s.rewards.pivot = v;
            else if (key == "invalid") s.rewards.invalid = v;
            else s.rewards.failed_exploit = v;
        }
    }
    if (!have_hosts) throw ConfigError("missing network.hosts");
    if (!have_subnets) throw ConfigError("missing network.subnets");
    if (!have_subnet_of) throw ConfigError("missing network.subnet_of");
    if (!have_flags) throw ConfigError("missing flags.hosts");
    if (!adjacency_text.empty() && !layout.empty())
        throw ConfigError("network.adjacency and network.layout are mutually exclusive");

    if (layout == "star") {
        s.adjacency = star_adjacency(s.subnets);
    } else if (layout.empty() || layout == "chain") {
        s.adjacency = chain_adjacency(s.subnets);
    } else {
        throw ConfigError("network.layout: unknown layout '" + layout + "'");
    }
    if (!adjacency_text.empty()) {
        s.adjacency.assign(s.subnets, std::vector<bool>(s.subnets, false));
        for (std::uint32_t i = 0; i < s.subnets; ++i) s.adjacency[i][i] = true;
        std::stringstream ss(adjacency_text);
        std::string pair;
        while (std::getline(ss, pair, ';')) {
            pair = detail::trim(pair);
            if (pair.empty()) continue;
            auto dash = pair.find('-');
            if (dash == std::string::npos) throw ConfigError("network.adjacency: expected a-b, got '" + pair + "'");
            auto a = detail::parse_uint("network.adjacency", detail::trim(std::string_view(pair).substr(0, dash)));
            auto b = detail::parse_uint("network.adjacency", detail::trim(std::string_view(pair).substr(dash + 1)));
            if (a >= s.subnets || b >= s.subnets)
                throw ConfigError("network.adjacency: pair '" + pair + "' references an unknown subnet");
            s.adjacency[a][b] = s.adjacency[b][a] = true;
        }
    }
    validate(s);
    return s;
}

inline ScenarioSpec parse_scenario(const std::string& text, std::string name) {
    std::istringstream in(text);
    return parse_scenario(in, std::move(name));
}

inline std::string to_config_text(const ScenarioSpec& s) {
    std::ostringstream os;
    auto list = [&](const std::vector<std::uint32_t>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    };
    os << "[network]\nhosts = " << s.hosts << "\nsubnets = " << s.subnets << "\nsubnet_of = ";
    list(s.subnet_of);
    os << "\nadjacency = ";
    bool first = true;
    for (std::uint32_t i = 0; i < s.subnets; ++i)
        for (std::uint32_t j = i + 1; j < s.subnets; ++j)
            if (s.adjacency[i][j]) os << (first ? "" : ";") << i << "-" << j, first = false;
    os << "\n[flags]\nhosts = ";
    list(s.flag_hosts);
    os << "\n[agent]\nfoothold = " << s.foothold;
    os << "\n[dynamics]\nexploit_prob = " << s.exploit_prob << "\nstep_limit = " << s.step_limit;
    os << "\n[actions]\nm = " << s.host_to_host_types << "\nn = " << s.host_to_subnet_types
       << "\no = " << s.on_host_types;
    os << "\n[rewards]\nflag = " << s.rewards.flag << "\npivot = " << s.rewards.pivot
       << "\ninvalid = " << s.rewards.invalid << "\nfailed_exploit = " << s.rewards.failed_exploit << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Presets. The files under presets/ in the repository carry the same text.

struct PresetText {
    const char* name;
    const char* text;
};

inline constexpr PresetText kPresets[] = {
    {"tiny", R"(# 2 subnets in a chain, 6 hosts, one flag. 84 actions.
[network]
hosts = 6
subnets = 2
subnet_of = 0,0,0,1,1,1
adjacency = 0-1
[flags]
hosts = 4
[agent]
foothold = 0
[dynamics]
exploit_prob = 1.0
step_limit = 100
[actions]
m = 2
n = 1
o = 2
)"},
    {"s6", R"(# 3 subnets in a chain, 6 hosts, two flags. 90 actions.
[network]
hosts = 6
subnets = 3
subnet_of = 0,0,1,1,2,2
adjacency = 0-1;1-2
[flags]
hosts = 3,5
[agent]
foothold = 0
[dynamics]
exploit_prob = 0.9
step_limit = 200
[actions]
m = 2
n = 1
o = 2
)"},
    {"s16", R"(# public hub subnet plus 3 private subnets, 16 hosts, two flags. 576 actions.
[network]
hosts = 16
subnets = 4
subnet_of = 0,0,0,0,1,1,1,1,2,2,2,2,3,3,3,3
layout = star
[flags]
hosts = 6,13
[agent]
foothold = 0
[dynamics]
exploit_prob = 0.9
step_limit = 100
[actions]
m = 2
n = 1
o = 2
)"},
    {"s24", R"(# 1 public + 7 private subnets, 3 hosts each, flags in subnets 5 and 7. 1344 actions.
[network]
hosts = 24
subnets = 8
subnet_of = 0,0,0,1,1,1,2,2,2,3,3,3,4,4,4,5,5,5,6,6,6,7,7,7
layout = star
[flags]
hosts = 16,22
[agent]
foothold = 0
[dynamics]
exploit_prob = 0.9
step_limit = 500
[actions]
m = 2
n = 1
o = 2
)"},
    {"s50", R"(# 1 public + 9 private subnets, 5 hosts each. 5500 actions.
[network]
hosts = 50
subnets = 10
subnet_of = 0,0,0,0,0,1,1,1,1,1,2,2,2,2,2,3,3,3,3,3,4,4,4,4,4,5,5,5,5,5,6,6,6,6,6,7,7,7,7,7,8,8,8,8,8,9,9,9,9,9
layout = star
[flags]
hosts = 27,48
[agent]
foothold = 0
[dynamics]
exploit_prob = 0.9
step_limit = 500
[actions]
m = 2
n = 1
o = 2
)"},
};

inline std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : kPresets) out.emplace_back(p.name);
    return out;
}

/// Embedded preset by name; ConfigError if unknown.
inline ScenarioSpec load_preset(const std::string& name) {
    for (const auto& p : kPresets)
        if (name == p.name) return parse_scenario(std::string(p.text), name);
    throw ConfigError("unknown scenario preset '" + name + "'");
}

inline ScenarioSpec load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    return parse_scenario(in, path.stem().string());
}

/// Resolves an existing file path, then `$HADRL_PRESET_DIR/<name>.scn`,
/// then the embedded presets.
inline ScenarioSpec resolve_scenario(const std::string& ref) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::is_regular_file(ref, ec)) return load_scenario_file(ref);
    if (const char* dir = std::getenv("HADRL_PRESET_DIR"); dir && *dir) {
        fs::path candidate = fs::path(dir) / (ref + ".scn");
        if (fs::is_regular_file(candidate, ec)) {
            auto s = load_scenario_file(candidate);
            s.name = ref;
            return s;
        }
    }
    return load_preset(ref);
}

}  // namespace hadrl
