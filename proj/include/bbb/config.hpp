#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "bbb/hydro.hpp"
#include "bbb/lattice.hpp"
#include "bbb/models.hpp"
#include "bbb/reference.hpp"
#include "bbb/wavefree.hpp"

namespace bbb {

using Json = nlohmann::ordered_json;

enum class ModelKind { spin_half, circle, particle_spin };
enum class Formulation { reference, f1_guided, f2_ensemble, f3_hydro, wavefree };

struct OutputSpec {
    std::size_t every = 1;         // write every k-th step (the final step is always written)
    std::size_t trajectories = 0;  // trajectories written as `traj` rows
};

struct Tolerances {
    double radicand = 1e-9;
    double probability_drift = 1e-8;
    double compare = 1e-6;
};

// Validated, typed view of a run configuration. `source` keeps the parsed document; its hash keys every output.
struct RunConfig {
    Json source;
    std::string hash;

    ModelKind model_kind = ModelKind::spin_half;
    SpinHalfModel spin;
    CircleModel circle;
    double hbar = 1;

    Formulation formulation = Formulation::wavefree;
    PolarField initial;

    double dt = 1e-3;
    double horizon = 1;
    std::size_t ensemble_size = 0;
    std::uint64_t seed = 0;

    UnitaryScheme integrator = UnitaryScheme::implicit_midpoint;
    WaveFreeOptions wavefree;
    HydroOptions hydro;
    DensityEstimator density;
    OutputSpec output;
    Tolerances tolerances;

    std::size_t steps() const;
    HermitianGenerator generator() const;
};

// Throws ValidationError whose message starts with the offending field path, e.g. "dt: must be positive".
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::string& path);

// Git blob hash (SHA-1 of "blob <size>\0" + compact JSON) of the configuration document.
std::string config_hash(const Json& doc);
std::string sha1_hex(const std::string& bytes);

std::string to_string(Formulation f);
std::string to_string(ModelKind m);

} // namespace bbb
