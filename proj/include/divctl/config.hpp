#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "divctl/chain.hpp"
#include "divctl/mc_verify.hpp"
#include "divctl/model.hpp"
#include "divctl/solver.hpp"

namespace divctl {

/// Probe point. Regimes are 1-based in files and 0-based here.
struct Probe {
    double x = 0.0;
    std::size_t regime = 0;
};

struct VerifySettings {
    double dt_sim = 1e-3;
    double t_max = 400.0;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 20110515;
    unsigned threads = 0;
};

struct RunConfig {
    ModelSpec model;
    double h = 0.1;
    double cap = 100.0;
    Method method = Method::PolicyIteration;
    SolverOptions solver;
    std::optional<VerifySettings> verify;
    std::vector<Probe> probes;
    std::vector<std::string> warnings;  ///< e.g. probes snapped to the lattice

    Grid grid() const { return Grid::make(h, cap); }
    SimConfig sim_config(const Probe& probe) const;
};

struct ConfigIssue {
    std::string path;  ///< JSON path, "$.grid.h"
    std::string message;
};

class ConfigError : public std::runtime_error {
public:
    enum class Kind { Syntax, Schema, Semantic };

    ConfigError(Kind kind, std::vector<ConfigIssue> issues);

    Kind kind() const noexcept { return kind_; }
    const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

private:
    Kind kind_;
    std::vector<ConfigIssue> issues_;
};

/// Parses and fully validates a run configuration. Throws ConfigError listing every
/// problem found at the first failing stage (syntax, then schema, then semantics).
RunConfig parse_config(std::string_view text);

RunConfig load_config(const std::filesystem::path& path);

/// The resolved configuration with every default materialized.
nlohmann::json to_json(const RunConfig& config);

}  // namespace divctl
