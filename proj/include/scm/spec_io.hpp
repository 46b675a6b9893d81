#pragma once

// JSON configuration for experiments.
//
// {
//   "design":    {"kind": "gaussian", "d": 5}            identity Sigma
//                {"kind": "gaussian", "sigma": [[...]]}
//                {"kind": "rademacher", "d": 5},
//   "mechanism": {"kind": "glm_well_specified", "family": "logistic"}
//                {"kind": "linear_plus_noise", "noise": {"kind": "laplace", "variance": 1}}
//                {"kind": "label_flip", "eps": 0.1},
//   "theta":     [1, 0, 0, 0, 0]  or  {"norm": 1}  (multiple of e_1),
//   "loss":      {"name": "logistic", "scale": 1},
//   "n_grid": [...], "trials": 100, "delta": 0.05, "seed": 1, "outputs": "out",
//   "oracle":    {"method": "quadrature"} or {"method": "monte_carlo", "samples": 1000000}
// }

#include <string>

#include "json.hpp"
#include "scm/harness.hpp"

namespace scm {

ExperimentSpec parse_experiment_spec(const nlohmann::json& j);
ExperimentSpec load_experiment_spec(const std::string& path);
nlohmann::json to_json(const ExperimentSpec& spec);

SparseSweepSpec parse_sparse_spec(const nlohmann::json& j);

NoiseKind parse_noise_kind(const std::string& s);
LossKind parse_family(const std::string& s);
std::string family_name(LossKind k);

}  // namespace scm
