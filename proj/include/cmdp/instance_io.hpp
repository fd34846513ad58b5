#pragma once

#include "cmdp/core.hpp"

#include "json.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

/// File formats.
///
/// Instance file (JSON), all arrays dense and 0-based:
///   { "S": int, "A": int, "H": int,
///     "P": [h][s][a][s'], "r": [h][s][a], "c": [h][s][a],
///     "b": number, "s1": int }
///
/// Policy file (JSON):
///   { "S": int, "A": int, "H": int,
///     "components": [ { "weight": number, "rule": [h][s][a] }, ... ] }
namespace cmdp {

/// Raised by the loaders when an instance breaks an invariant.
class InvalidInstance : public std::runtime_error {
public:
    explicit InvalidInstance(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

nlohmann::json to_json(const TabularCmdp& m);

/// Parses, validates, then renormalizes every transition row once.
TabularCmdp cmdp_from_json(const nlohmann::json& j);

TabularCmdp load_instance(const std::filesystem::path& path);
void save_instance(const TabularCmdp& m, const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON text of the instance.
std::string instance_hash(const TabularCmdp& m);

nlohmann::json to_json(const MixturePolicy& mix);
MixturePolicy mixture_from_json(const nlohmann::json& j);

MixturePolicy load_policy(const std::filesystem::path& path);
void save_policy(const MixturePolicy& mix, const std::filesystem::path& path);

/// Reads a whole JSON document; errors name the file.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace cmdp
