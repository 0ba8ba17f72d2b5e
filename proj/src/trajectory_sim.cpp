#include "qfc/trajectory_sim.hpp"

#include "qfc/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace qfc {

namespace {

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void check_dt(double dt)
{
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("time step must be finite and positive");
    }
}

void check_counting_dt(double dt, const ModelParams& params)
{
    if (dt * params.kappa_s_sq() >= 1.0) {
        throw std::invalid_argument("counting step too large: dt * kappa_s^2 must stay below 1");
    }
}

struct NoRecorder {
    void operator()(const TrajectoryRow&) {}
};

// Runs one path and returns its realized cost. `record` sees every row,
// including the final one at t = T.
template <typename Recorder>
double run_path(Model model, const Policy& policy, const InitialState& initial,
                const ModelParams& params, double dt, PathRng& rng, const SimOptions& options,
                Recorder&& record, double* terminal_out = nullptr)
{
    const std::size_t n = step_count(params.horizon(), dt);
    const double sqrt_dt = std::sqrt(dt);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double running = 0.0;
    TrajectoryRow row;

    if (model == Model::AngleLQ) {
        if (!std::holds_alternative<AngleState>(initial)) {
            throw std::invalid_argument("angle model needs an angle initial state");
        }
        AngleState s = std::get<AngleState>(initial);
        s.theta = wrap_angle(s.theta);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            const double B = policy.field(t, s);
            const double dW = sqrt_dt * gauss(rng);
            row = {};
            row.t = t;
            row.angle = s;
            row.B = B;
            row.noise = dW;
            row.dY = dW;
            row.running_cost = running;
            record(row);
            running += B * B * dt;
            s = step_angle(s, B, dt, dW, params);
        }
        row = {};
        row.t = static_cast<double>(n) * dt;
        row.angle = s;
        row.running_cost = running;
        record(row);
        const double terminal = s.theta * s.theta;
        if (terminal_out) {
            *terminal_out = terminal;
        }
        return terminal + running;
    }

    if (!std::holds_alternative<BlochVector>(initial)) {
        throw std::invalid_argument("qubit models need a Bloch-vector initial state");
    }
    BlochVector p = std::get<BlochVector>(initial);
    if (!is_finite(p) || norm(p) > 1.0 + options.ball_tolerance) {
        throw std::invalid_argument("initial Bloch vector lies outside the ball");
    }
    if (model == Model::CountingQubit) {
        check_counting_dt(dt, params);
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const ControlPair u = policy.control(t, p);
        row = {};
        row.t = t;
        row.p = p;
        row.u = u;
        row.running_cost = running;
        BlochVector next;
        if (model == Model::DiffusiveQubit) {
            const double dW = sqrt_dt * gauss(rng);
            row.noise = dW;
            row.dY = observation_drift(p, params) * dt + dW;
            next = step_diffusive(p, u, dt, dW, params, options.ball_tolerance);
        } else {
            const bool jumped = sample_jump(p, dt, params, rng);
            row.noise = jumped ? 1.0 : 0.0;
            row.dY = row.noise;
            next = step_counting(p, u, dt, jumped, params, options.ball_tolerance);
        }
        record(row);
        running += u.norm_sq() * dt;
        p = next;
    }
    row = {};
    row.t = static_cast<double>(n) * dt;
    row.p = p;
    row.running_cost = running;
    record(row);
    const double terminal = 1.0 - p.z;
    if (terminal_out) {
        *terminal_out = terminal;
    }
    return terminal + running;
}

void put(std::ostream& os, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

} // namespace

PathRng make_path_rng(std::uint64_t master_seed, std::uint64_t path_index)
{
    std::uint64_t state = master_seed;
    const std::uint64_t a = splitmix64(state);
    state = a ^ (path_index * 0xd1b54a32d192ed03ULL);
    const std::uint64_t b = splitmix64(state);
    const std::uint64_t c = splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return PathRng(seq);
}

BlochVector step_diffusive(const BlochVector& p, const ControlPair& u, double dt, double dW,
                           const ModelParams& params, double ball_tolerance)
{
    check_dt(dt);
    const BlochVector next = p + diffusive_drift(p, u) * dt + diffusive_diffusion(p, params) * dW;
    return project_to_ball(next, ball_tolerance);
}

BlochVector step_counting(const BlochVector& p, const ControlPair& u, double dt, bool jumped,
                          const ModelParams& params, double ball_tolerance)
{
    check_dt(dt);
    check_counting_dt(dt, params);
    if (jumped) {
        return jump_target(p + counting_drift(p, u, params) * dt);
    }
    return project_to_ball(p + counting_drift(p, u, params) * dt, ball_tolerance);
}

AngleState step_angle(const AngleState& s, double B, double dt, double dW, const ModelParams& params)
{
    check_dt(dt);
    const SdeCoefficients c = angle_coefficients(s, B, params);
    return {wrap_angle(s.theta + c.drift * dt + c.diffusion * dW), s.r};
}

bool sample_jump(const BlochVector& p, double dt, const ModelParams& params, PathRng& rng)
{
    check_dt(dt);
    const double prob = jump_intensity(p, params) * dt;
    if (prob >= 1.0) {
        throw std::invalid_argument("sample_jump: intensity * dt must stay below 1");
    }
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < prob;
}

std::size_t step_count(double T, double dt)
{
    check_dt(dt);
    const double ratio = T / dt;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(n * dt - T) > 1e-9 * T) {
        throw std::invalid_argument("time step must divide the horizon");
    }
    return static_cast<std::size_t>(n);
}

Trajectory simulate(Model model, const Policy& policy, const InitialState& initial,
                    const ModelParams& params, double dt, std::uint64_t seed,
                    const SimOptions& options)
{
    Trajectory traj;
    traj.model = model;
    traj.dt = dt;
    traj.rows.reserve(step_count(params.horizon(), dt) + 1);
    PathRng rng = make_path_rng(seed, 0);
    traj.total_cost = run_path(
        model, policy, initial, params, dt, rng, options,
        [&traj](const TrajectoryRow& r) { traj.rows.push_back(r); }, &traj.terminal_cost);
    return traj;
}

double simulate_cost(Model model, const Policy& policy, const InitialState& initial,
                     const ModelParams& params, double dt, std::uint64_t master_seed,
                     std::uint64_t path_index, const SimOptions& options)
{
    PathRng rng = make_path_rng(master_seed, path_index);
    return run_path(model, policy, initial, params, dt, rng, options, NoRecorder{});
}

unsigned default_thread_count()
{
    if (const char* env = std::getenv("QFC_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) {
            return static_cast<unsigned>(v);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

std::vector<double> batch_costs(Model model, const Policy& policy, const InitialState& initial,
                                const ModelParams& params, double dt, std::size_t n_paths,
                                std::uint64_t seed, unsigned threads, const SimOptions& options)
{
    if (n_paths == 0) {
        throw std::invalid_argument("batch needs at least one path");
    }
    step_count(params.horizon(), dt);
    std::vector<double> costs(n_paths);
    detail::parallel_for(n_paths, threads, [&](std::size_t i) {
        costs[i] = simulate_cost(model, policy, initial, params, dt, seed, i, options);
    });
    return costs;
}

CostStatistics run_batch(Model model, const Policy& policy, const InitialState& initial,
                         const ModelParams& params, double dt, std::size_t n_paths,
                         std::uint64_t seed, unsigned threads, const SimOptions& options)
{
    const auto costs = batch_costs(model, policy, initial, params, dt, n_paths, seed, threads, options);
    return CostStatistics::from_samples(costs);
}

std::vector<StateMoments> ensemble_moments(Model model, const Policy& policy, const BlochVector& p0,
                                           const ModelParams& params, double dt,
                                           std::size_t n_paths, std::uint64_t seed,
                                           std::span<const std::size_t> checkpoint_steps,
                                           unsigned threads, const SimOptions& options)
{
    if (!is_qubit_model(model)) {
        throw std::invalid_argument("ensemble_moments: qubit models only");
    }
    if (n_paths == 0) {
        throw std::invalid_argument("ensemble needs at least one path");
    }
    const std::size_t n_steps = step_count(params.horizon(), dt);
    for (std::size_t k : checkpoint_steps) {
        if (k > n_steps) {
            throw std::invalid_argument("checkpoint beyond the horizon");
        }
    }
    const std::size_t m = checkpoint_steps.size();
    std::vector<BlochVector> states(n_paths * m);
    detail::parallel_for(n_paths, threads, [&](std::size_t i) {
        PathRng rng = make_path_rng(seed, i);
        std::size_t step = 0;
        run_path(model, policy, InitialState{p0}, params, dt, rng, options,
                 [&](const TrajectoryRow& r) {
                     for (std::size_t c = 0; c < m; ++c) {
                         if (checkpoint_steps[c] == step) {
                             states[i * m + c] = r.p;
                         }
                     }
                     ++step;
                 });
    });

    std::vector<StateMoments> out(m);
    for (std::size_t c = 0; c < m; ++c) {
        RunningMoments mx, my, mz;
        for (std::size_t i = 0; i < n_paths; ++i) {
            const BlochVector& p = states[i * m + c];
            mx.add(p.x);
            my.add(p.y);
            mz.add(p.z);
        }
        out[c].t = static_cast<double>(checkpoint_steps[c]) * dt;
        out[c].mean = {mx.mean(), my.mean(), mz.mean()};
        out[c].std_error = {mx.summary().std_error, my.summary().std_error, mz.summary().std_error};
    }
    return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
    if (traj.model == Model::AngleLQ) {
        os << "t,theta,B,dW,running_cost\n";
        for (const auto& r : traj.rows) {
            put(os, r.t);
            for (double v : {r.angle.theta, r.B, r.noise, r.running_cost}) {
                os << ',';
                put(os, v);
            }
            os << '\n';
        }
        return;
    }
    os << "t,px,py,pz,u_plus,u_minus,dW_or_dN,dY,running_cost\n";
    for (const auto& r : traj.rows) {
        put(os, r.t);
        for (double v : {r.p.x, r.p.y, r.p.z, r.u.u_plus, r.u.u_minus, r.noise, r.dY, r.running_cost}) {
            os << ',';
            put(os, v);
        }
        os << '\n';
    }
}

} // namespace qfc
