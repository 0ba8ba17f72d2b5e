#include "qfc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

namespace qfc {

namespace {

constexpr double ball_mask_tolerance = 1e-12;

} // namespace

std::string_view control_mode_name(ControlMode m)
{
    return m == ControlMode::ClosedForm ? "closed-form" : "exhaustive";
}

ControlMode parse_control_mode(std::string_view name)
{
    if (name == "closed-form") {
        return ControlMode::ClosedForm;
    }
    if (name == "exhaustive") {
        return ControlMode::Exhaustive;
    }
    throw GridSpecError("mode", "expected 'closed-form' or 'exhaustive', got '" + std::string(name) + "'");
}

GridSpec GridSpec::angle(std::size_t nodes, double delta, std::size_t steps)
{
    GridSpec s;
    s.model = Model::AngleLQ;
    s.lower = {-std::numbers::pi, 0.0, 0.0};
    s.upper = {std::numbers::pi, 0.0, 0.0};
    s.nodes = {nodes, 1, 1};
    s.delta = delta;
    s.steps = steps;
    s.u_max = 20.0;
    s.control_nodes = 161;
    return s;
}

GridSpec GridSpec::qubit(Model model, std::size_t nodes, double delta, std::size_t steps)
{
    if (!is_qubit_model(model)) {
        throw GridSpecError("model", "GridSpec::qubit needs a qubit model");
    }
    GridSpec s;
    s.model = model;
    s.nodes = {nodes, nodes, nodes};
    s.delta = delta;
    s.steps = steps;
    return s;
}

void GridSpec::validate(const ModelParams& params) const
{
    for (std::size_t a = 0; a < dims(); ++a) {
        if (!std::isfinite(lower[a]) || !std::isfinite(upper[a]) || !(lower[a] < upper[a])) {
            throw GridSpecError("bounds", "axis " + std::to_string(a) + " needs finite lower < upper");
        }
        if (nodes[a] < 3) {
            throw GridSpecError("nodes", "at least 3 nodes per axis are required");
        }
    }
    if (is_qubit_model(model)) {
        for (std::size_t a = 0; a < 3; ++a) {
            if (lower[a] > -1.0 || upper[a] < 1.0) {
                throw GridSpecError("bounds", "the qubit grid must cover the unit ball");
            }
        }
    }
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw GridSpecError("delta", "time step must be finite and positive");
    }
    if (steps > 0) {
        const double T = params.horizon();
        if (std::abs(static_cast<double>(steps) * delta - T) > 1e-9 * T) {
            throw GridSpecError("steps", "steps * delta must equal the horizon T");
        }
    }
    if (mode == ControlMode::Exhaustive) {
        if (!(u_max > 0.0) || !std::isfinite(u_max)) {
            throw GridSpecError("u_max", "control box half-width must be finite and positive");
        }
        if (control_nodes < 1) {
            throw GridSpecError("control_nodes", "at least one control grid point is required");
        }
        if (is_qubit_model(model) && params.controls_degenerate()) {
            std::cerr << "warning: kappa_f = 0 makes the laser ineffective, but a control box of "
                      << u_max << " is configured\n";
        }
    }
}

StateGrid::StateGrid(const GridSpec& spec) : dims_(spec.dims())
{
    for (std::size_t a = 0; a < dims_; ++a) {
        if (spec.nodes[a] < 2 || !(spec.lower[a] < spec.upper[a])) {
            throw GridSpecError("nodes", "degenerate grid axis");
        }
        n_[a] = spec.nodes[a];
        lo_[a] = spec.lower[a];
        hi_[a] = spec.upper[a];
        h_[a] = (hi_[a] - lo_[a]) / static_cast<double>(n_[a] - 1);
    }
    size_ = n_[0] * n_[1] * n_[2];
    active_.assign(size_, true);
    nearest_.resize(size_);
    for (std::size_t idx = 0; idx < size_; ++idx) {
        nearest_[idx] = idx;
        if (dims_ == 3) {
            active_[idx] = norm(point(idx)) <= 1.0 + ball_mask_tolerance;
        }
    }
    active_count_ = static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true));
    if (active_count_ == 0) {
        throw GridSpecError("nodes", "no grid node lies inside the unit ball");
    }
    if (active_count_ == size_) {
        return;
    }
    // Masked nodes borrow from the closest active node near their radial
    // projection onto the sphere.
    for (std::size_t idx = 0; idx < size_; ++idx) {
        if (active_[idx]) {
            continue;
        }
        const Vec3 p = point(idx);
        const Vec3 q = p * (1.0 / norm(p));
        std::array<long, 3> c{};
        const double qc[3] = {q.x, q.y, q.z};
        for (std::size_t a = 0; a < 3; ++a) {
            c[a] = std::lround((qc[a] - lo_[a]) / h_[a]);
        }
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_idx = idx;
        for (long radius = 1; best_idx == idx; ++radius) {
            for (long di = -radius; di <= radius; ++di) {
                for (long dj = -radius; dj <= radius; ++dj) {
                    for (long dk = -radius; dk <= radius; ++dk) {
                        const long i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
                        if (i < 0 || j < 0 || k < 0 || i >= static_cast<long>(n_[0]) ||
                            j >= static_cast<long>(n_[1]) || k >= static_cast<long>(n_[2])) {
                            continue;
                        }
                        const std::size_t cand = index(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                                       static_cast<std::size_t>(k));
                        if (!active_[cand]) {
                            continue;
                        }
                        const double d = norm(point(cand) - p);
                        if (d < best) {
                            best = d;
                            best_idx = cand;
                        }
                    }
                }
            }
        }
        nearest_[idx] = best_idx;
    }
}

std::array<std::size_t, 3> StateGrid::unflatten(std::size_t idx) const
{
    const std::size_t k = idx % n_[2];
    const std::size_t j = (idx / n_[2]) % n_[1];
    const std::size_t i = idx / (n_[1] * n_[2]);
    return {i, j, k};
}

Vec3 StateGrid::point(std::size_t idx) const
{
    const auto [i, j, k] = unflatten(idx);
    if (dims_ == 1) {
        return {coordinate(0, i), 0.0, 0.0};
    }
    return {coordinate(0, i), coordinate(1, j), coordinate(2, k)};
}

void StateGrid::fill_masked(std::vector<double>& slice, std::size_t components) const
{
    if (active_count_ == size_) {
        return;
    }
    for (std::size_t idx = 0; idx < size_; ++idx) {
        if (!active_[idx]) {
            for (std::size_t c = 0; c < components; ++c) {
                slice[idx * components + c] = slice[nearest_[idx] * components + c];
            }
        }
    }
}

double StateGrid::interpolate(const double* slice, const Vec3& q, std::size_t stride, std::size_t offset) const
{
    const double qc[3] = {q.x, q.y, q.z};
    std::array<std::size_t, 3> i0{0, 0, 0};
    std::array<double, 3> w{0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < dims_; ++a) {
        const double x = std::clamp(qc[a], lo_[a], hi_[a]);
        const double s = (x - lo_[a]) / h_[a];
        const auto cell = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(s))), n_[a] - 2);
        i0[a] = cell;
        w[a] = std::clamp(s - static_cast<double>(cell), 0.0, 1.0);
    }
    double acc = 0.0;
    const std::size_t corners = std::size_t{1} << dims_;
    for (std::size_t c = 0; c < corners; ++c) {
        double weight = 1.0;
        std::array<std::size_t, 3> at{0, 0, 0};
        for (std::size_t a = 0; a < dims_; ++a) {
            const bool up = (c >> a) & 1U;
            at[a] = i0[a] + (up ? 1 : 0);
            weight *= up ? w[a] : 1.0 - w[a];
        }
        if (weight != 0.0) {
            acc += weight * slice[index(at[0], at[1], at[2]) * stride + offset];
        }
    }
    return acc;
}

} // namespace qfc
