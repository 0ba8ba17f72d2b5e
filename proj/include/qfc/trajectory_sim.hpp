#pragma once

// Forward simulation of the filtered models under a feedback policy and
// Monte Carlo estimation of the expected cost.
//
// Integrators: Euler-Maruyama for the homodyne filter and the angle SDE,
// Euler with Bernoulli thinning for the counting filter. Within a counting
// step the drift is applied first; a detection then resets the state.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "qfc/filter_core.hpp"
#include "qfc/model.hpp"
#include "qfc/parallel.hpp"
#include "qfc/policy.hpp"
#include "qfc/statistics.hpp"

namespace qfc {

/// Per-path generator: the master seed and the path index are mixed through
/// SplitMix64, so every path owns an independent, reproducible stream.
using PathRng = std::mt19937_64;
PathRng make_path_rng(std::uint64_t master_seed, std::uint64_t path_index);

BlochVector step_diffusive(const BlochVector& p, const ControlPair& u, double dt, double dW,
                           const ModelParams& params, double ball_tolerance = default_ball_tolerance);

/// Throws std::invalid_argument when dt * kappa_s^2 >= 1 (the largest
/// detection rate on the ball).
BlochVector step_counting(const BlochVector& p, const ControlPair& u, double dt, bool jumped,
                          const ModelParams& params, double ball_tolerance = default_ball_tolerance);

AngleState step_angle(const AngleState& s, double B, double dt, double dW, const ModelParams& params);

/// Detection in [t, t + dt) with probability jump_intensity(p) dt.
bool sample_jump(const BlochVector& p, double dt, const ModelParams& params, PathRng& rng);

using InitialState = ModelState;

/// One row per grid time t_k = k dt. Controls and increments describe the
/// interval [t_k, t_k + dt); they are zero on the final row.
struct TrajectoryRow {
    double t = 0.0;
    BlochVector p;
    AngleState angle;
    ControlPair u;
    double B = 0.0;
    double noise = 0.0; ///< dW, or dN in {0, 1} for the counting model
    double dY = 0.0;    ///< observation increment
    double running_cost = 0.0; ///< accumulated control cost on [0, t_k]
};

struct Trajectory {
    Model model = Model::DiffusiveQubit;
    double dt = 0.0;
    std::vector<TrajectoryRow> rows;
    double terminal_cost = 0.0;
    double total_cost = 0.0; ///< terminal cost + final running cost
};

struct SimOptions {
    double ball_tolerance = default_ball_tolerance;
};

/// Number of steps for horizon T; throws unless dt divides T.
std::size_t step_count(double T, double dt);

Trajectory simulate(Model model, const Policy& policy, const InitialState& initial,
                    const ModelParams& params, double dt, std::uint64_t seed,
                    const SimOptions& options = {});

/// Realized cost of path `path_index` of a batch seeded with `master_seed`;
/// equals simulate(..., make_path_rng(master_seed, path_index)) without
/// recording the path.
double simulate_cost(Model model, const Policy& policy, const InitialState& initial,
                     const ModelParams& params, double dt, std::uint64_t master_seed,
                     std::uint64_t path_index, const SimOptions& options = {});

/// Realized costs of n_paths independent paths, indexed by path. Paths share
/// nothing, so the result does not depend on `threads`.
std::vector<double> batch_costs(Model model, const Policy& policy, const InitialState& initial,
                                const ModelParams& params, double dt, std::size_t n_paths,
                                std::uint64_t seed, unsigned threads = 0,
                                const SimOptions& options = {});

CostStatistics run_batch(Model model, const Policy& policy, const InitialState& initial,
                         const ModelParams& params, double dt, std::size_t n_paths,
                         std::uint64_t seed, unsigned threads = 0, const SimOptions& options = {});

/// Sample mean and standard error of the Bloch vector at chosen step indices
/// (qubit models only).
struct StateMoments {
    double t = 0.0;
    Vec3 mean;
    Vec3 std_error;
};

std::vector<StateMoments> ensemble_moments(Model model, const Policy& policy, const BlochVector& p0,
                                           const ModelParams& params, double dt,
                                           std::size_t n_paths, std::uint64_t seed,
                                           std::span<const std::size_t> checkpoint_steps,
                                           unsigned threads = 0, const SimOptions& options = {});

/// CSV with header t,px,py,pz,u_plus,u_minus,dW_or_dN,dY,running_cost (qubit
/// models) or t,theta,B,dW,running_cost (angle model); 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

} // namespace qfc
