#include "cmdp/instance_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cmdp {

using nlohmann::json;

namespace {

std::string describe(const std::vector<Violation>& violations) {
    std::ostringstream out;
    out << "invalid instance (" << violations.size() << " violation" << (violations.size() == 1 ? "" : "s") << ")";
    for (const auto& v : violations) out << "\n  " << to_string(v);
    return out.str();
}

int positive_int(const json& j, const char* key) {
    if (!j.contains(key)) throw std::runtime_error(std::string("instance: missing key \"") + key + "\"");
    const int v = j.at(key).get<int>();
    if (v <= 0) throw std::runtime_error(std::string("instance: \"") + key + "\" must be positive");
    return v;
}

/// Flattens a nested array of the given depth, checking every extent.
void flatten(const json& j, const std::vector<int>& extents, std::size_t depth, std::vector<double>& out,
             const char* key) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(extents[depth]))
        throw std::runtime_error(std::string("instance: \"") + key + "\" has the wrong shape");
    for (const auto& item : j) {
        if (depth + 1 == extents.size())
            out.push_back(item.get<double>());
        else
            flatten(item, extents, depth + 1, out, key);
    }
}

std::vector<double> read_array(const json& j, const char* key, const std::vector<int>& extents) {
    if (!j.contains(key)) throw std::runtime_error(std::string("instance: missing key \"") + key + "\"");
    std::vector<double> out;
    flatten(j.at(key), extents, 0, out, key);
    return out;
}

json nest_stage(const StageTable& t) {
    json out = json::array();
    for (int h = 0; h < t.horizon(); ++h) {
        json per_state = json::array();
        for (int s = 0; s < t.num_states(); ++s) {
            json per_action = json::array();
            for (int a = 0; a < t.num_actions(); ++a) per_action.push_back(t(h, s, a));
            per_state.push_back(std::move(per_action));
        }
        out.push_back(std::move(per_state));
    }
    return out;
}

} // namespace

InvalidInstance::InvalidInstance(std::vector<Violation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

json to_json(const TabularCmdp& m) {
    const int S = m.num_states(), A = m.num_actions(), H = m.horizon();
    json p = json::array();
    for (int h = 0; h < H; ++h) {
        json per_state = json::array();
        for (int s = 0; s < S; ++s) {
            json per_action = json::array();
            for (int a = 0; a < A; ++a) {
                const auto row = m.transition.row(h, s, a);
                per_action.push_back(std::vector<double>(row.begin(), row.end()));
            }
            per_state.push_back(std::move(per_action));
        }
        p.push_back(std::move(per_state));
    }
    json out;
    out["S"] = S;
    out["A"] = A;
    out["H"] = H;
    out["P"] = std::move(p);
    out["r"] = nest_stage(m.reward);
    out["c"] = nest_stage(m.cost);
    out["b"] = m.budget;
    out["s1"] = m.initial_state;
    return out;
}

TabularCmdp cmdp_from_json(const json& j) {
    if (!j.is_object()) throw std::runtime_error("instance: expected a JSON object");
    const int S = positive_int(j, "S"), A = positive_int(j, "A"), H = positive_int(j, "H");
    TabularCmdp m;
    m.transition = Kernel(S, A, H, read_array(j, "P", {H, S, A, S}));
    m.reward = StageTable(S, A, H, read_array(j, "r", {H, S, A}));
    m.cost = StageTable(S, A, H, read_array(j, "c", {H, S, A}));
    if (!j.contains("b")) throw std::runtime_error("instance: missing key \"b\"");
    m.budget = j.at("b").get<double>();
    m.initial_state = j.value("s1", 0);
    if (auto violations = validate_cmdp(m); !violations.empty()) throw InvalidInstance(std::move(violations));
    m.transition.normalize_rows();
    return m;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TabularCmdp load_instance(const std::filesystem::path& path) { return cmdp_from_json(read_json_file(path)); }

void save_instance(const TabularCmdp& m, const std::filesystem::path& path) {
    write_text_file(path, to_json(m).dump(1) + "\n");
}

std::string instance_hash(const TabularCmdp& m) {
    const std::string text = to_json(m).dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

json to_json(const MixturePolicy& mix) {
    const auto& first = *mix.components().front().policy;
    const int S = first.num_states(), A = first.num_actions(), H = first.horizon();
    json components = json::array();
    for (const auto& c : mix.components()) {
        json rule = json::array();
        for (int h = 0; h < H; ++h) {
            json per_state = json::array();
            for (int s = 0; s < S; ++s) {
                const auto d = c.policy->distribution(h, s);
                per_state.push_back(std::vector<double>(d.begin(), d.end()));
            }
            rule.push_back(std::move(per_state));
        }
        components.push_back({{"weight", c.weight}, {"rule", std::move(rule)}});
    }
    return {{"S", S}, {"A", A}, {"H", H}, {"components", std::move(components)}};
}

MixturePolicy mixture_from_json(const json& j) {
    const int S = positive_int(j, "S"), A = positive_int(j, "A"), H = positive_int(j, "H");
    if (!j.contains("components") || !j.at("components").is_array())
        throw std::runtime_error("policy: missing \"components\" array");
    std::vector<MixtureComponent> components;
    for (const auto& c : j.at("components")) {
        std::vector<double> probs;
        flatten(c.at("rule"), {H, S, A}, 0, probs, "rule");
        components.push_back({c.at("weight").get<double>(),
                              std::make_shared<const Policy>(S, A, H, std::move(probs))});
    }
    return MixturePolicy(std::move(components));
}

MixturePolicy load_policy(const std::filesystem::path& path) { return mixture_from_json(read_json_file(path)); }

void save_policy(const MixturePolicy& mix, const std::filesystem::path& path) {
    write_text_file(path, to_json(mix).dump(1) + "\n");
}

} // namespace cmdp
