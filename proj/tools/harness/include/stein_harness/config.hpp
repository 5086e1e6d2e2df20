#pragma once

#include "stein/fields.hpp"
#include "stein/stein_bound.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace stein::harness {

using json = nlohmann::json;

// Invalid or incomplete configuration (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One run of one operation. `manifold`, `potential` and `params` keep their JSON form and are
// validated on parse; builders below turn them into library objects.
struct ExperimentConfig {
    std::string operation;
    json manifold;
    json potential;
    json params = json::object();
    std::size_t n_samples = 1000;
    double steps_per_unit_time = 1000.0;
    std::optional<std::uint64_t> seed;
    std::string output;
};

// Known operations: verify-geometry, simulate, estimate, solve-stein, decay-profile, stein-bound,
// spectral, suite.
const std::vector<std::string>& operation_names();

// Rejects unknown fields at every level; `seed` may be filled in later from flags or STEIN_SEED.
ExperimentConfig parse_config(const json& j);
json config_to_json(const ExperimentConfig& c);

// FNV-1a 64 of the canonical JSON (output path excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Named configurations for the worked examples.
ExperimentConfig preset(const std::string& name);
const std::vector<std::string>& preset_names();

// Manifold shorthands: sphere2, hyperbolic3, circle, euclidean1, euclidean2, euclidean3.
json manifold_shorthand(const std::string& name);

ManifoldPtr build_manifold(const json& spec);
PotentialSpec build_potential(const json& spec, const Manifold& M);
// {"kind": "linear", "b": [...]}, {"kind": "coordinate", "index": i}, {"kind": "sin", "frequency": k},
// {"kind": "cos", ...}, {"kind": "quadratic", "Q": [[...]], "b": [...]}, {"kind": "polynomial", "degree": d, "seed": s}.
ScalarField build_function(const json& spec, const Manifold& M);
// {"kind": "circle_metropolis" | "sphere_geodesic" | "sphere_antipodal" | "euclidean_gaussian", "lambda": l, ...}
PairSampler build_sampler(const json& spec, const Manifold& M, const PotentialSpec& pot);

// params.x when present (checked against the manifold), otherwise a fixed default point.
Vec start_point(const json& params, const Manifold& M);

Vec json_vec(const json& j);
Mat json_mat(const json& j);
json vec_json(const Vec& v);
json mat_json(const Mat& m);

// Typed parameter access with ConfigError on type mismatch.
double param_double(const json& params, const std::string& key, double fallback);
std::size_t param_size(const json& params, const std::string& key, std::size_t fallback);
std::string param_string(const json& params, const std::string& key, const std::string& fallback);
std::vector<double> param_doubles(const json& params, const std::string& key, const std::vector<double>& fallback);

// Throws ConfigError unless every key of `obj` is in `allowed`.
void require_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& where);

}  // namespace stein::harness
