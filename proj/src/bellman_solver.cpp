#include "qfc/bellman_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qfc/parallel.hpp"

namespace qfc {

namespace {

constexpr std::size_t no_node = std::numeric_limits<std::size_t>::max();

// Finite-difference derivatives of one slice at one node.
struct LocalDerivatives {
    std::array<double, 3> forward{0, 0, 0};
    std::array<double, 3> backward{0, 0, 0};
    std::array<double, 3> central{0, 0, 0};
    std::array<bool, 3> has_forward{false, false, false};
    std::array<bool, 3> has_backward{false, false, false};
    Hessian3 hess;

    Vec3 central_gradient() const { return {central[0], central[1], central[2]}; }

    // Hybrid differencing: central where the cell Peclet number |v| h / (2 D)
    // is at most one (the central stencil is then monotone), otherwise the
    // one-sided difference from the side the drift points to. The other side
    // is used when the preferred neighbour is missing.
    Vec3 upwind(const std::array<double, 3>& velocity, const std::array<double, 3>& peclet_limit) const
    {
        std::array<double, 3> g{0, 0, 0};
        for (std::size_t a = 0; a < 3; ++a) {
            const double v = velocity[a];
            if (has_forward[a] && has_backward[a] && std::abs(v) <= peclet_limit[a]) {
                g[a] = central[a];
            } else if (v > 0.0) {
                g[a] = has_forward[a] ? forward[a] : backward[a];
            } else if (v < 0.0) {
                g[a] = has_backward[a] ? backward[a] : forward[a];
            } else {
                g[a] = central[a];
            }
        }
        return {g[0], g[1], g[2]};
    }
};

class SliceView {
public:
    SliceView(const StateGrid& grid, std::span<const double> values) : grid_(grid), values_(values) {}

    double at(std::size_t idx) const { return values_[idx]; }

    // Node displaced by offsets along up to two axes, or no_node off the grid.
    // Masked nodes count as neighbours: they hold ghost values copied from
    // the nearest active node.
    std::size_t neighbour(const std::array<std::size_t, 3>& ijk, std::size_t a, long da,
                          std::size_t b = 0, long db = 0) const
    {
        std::array<long, 3> c{static_cast<long>(ijk[0]), static_cast<long>(ijk[1]), static_cast<long>(ijk[2])};
        c[a] += da;
        c[b] += db;
        for (std::size_t ax = 0; ax < 3; ++ax) {
            if (c[ax] < 0 || c[ax] >= static_cast<long>(grid_.count(ax))) {
                return no_node;
            }
        }
        return grid_.index(static_cast<std::size_t>(c[0]), static_cast<std::size_t>(c[1]),
                           static_cast<std::size_t>(c[2]));
    }

    LocalDerivatives derivatives(std::size_t idx) const
    {
        LocalDerivatives d;
        const auto ijk = grid_.unflatten(idx);
        const double j0 = at(idx);
        double second[3] = {0, 0, 0};
        for (std::size_t a = 0; a < grid_.dims(); ++a) {
            const double h = grid_.spacing(a);
            const std::size_t f = neighbour(ijk, a, 1);
            const std::size_t b = neighbour(ijk, a, -1);
            d.has_forward[a] = f != no_node;
            d.has_backward[a] = b != no_node;
            if (d.has_forward[a]) {
                d.forward[a] = (at(f) - j0) / h;
            }
            if (d.has_backward[a]) {
                d.backward[a] = (j0 - at(b)) / h;
            }
            if (d.has_forward[a] && d.has_backward[a]) {
                d.central[a] = (at(f) - at(b)) / (2.0 * h);
                second[a] = (at(f) - 2.0 * j0 + at(b)) / (h * h);
            } else if (d.has_forward[a]) {
                d.central[a] = d.forward[a];
                const std::size_t f2 = neighbour(ijk, a, 2);
                if (f2 != no_node) {
                    second[a] = (j0 - 2.0 * at(f) + at(f2)) / (h * h);
                }
            } else if (d.has_backward[a]) {
                d.central[a] = d.backward[a];
                const std::size_t b2 = neighbour(ijk, a, -2);
                if (b2 != no_node) {
                    second[a] = (j0 - 2.0 * at(b) + at(b2)) / (h * h);
                }
            }
        }
        d.hess.xx = second[0];
        d.hess.yy = second[1];
        d.hess.zz = second[2];
        if (grid_.dims() == 3) {
            d.hess.xy = mixed(ijk, j0, 0, 1);
            d.hess.xz = mixed(ijk, j0, 0, 2);
            d.hess.yz = mixed(ijk, j0, 1, 2);
        }
        return d;
    }

private:
    double mixed(const std::array<std::size_t, 3>& ijk, double j0, std::size_t a, std::size_t b) const
    {
        const double ha = grid_.spacing(a);
        const double hb = grid_.spacing(b);
        const std::size_t pp = neighbour(ijk, a, 1, b, 1);
        const std::size_t pm = neighbour(ijk, a, 1, b, -1);
        const std::size_t mp = neighbour(ijk, a, -1, b, 1);
        const std::size_t mm = neighbour(ijk, a, -1, b, -1);
        if (pp != no_node && pm != no_node && mp != no_node && mm != no_node) {
            return (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * ha * hb);
        }
        // one-sided quadrant stencil
        for (long sa : {1L, -1L}) {
            for (long sb : {1L, -1L}) {
                const std::size_t ab = neighbour(ijk, a, sa, b, sb);
                const std::size_t a0 = neighbour(ijk, a, sa);
                const std::size_t b0 = neighbour(ijk, b, sb);
                if (ab != no_node && a0 != no_node && b0 != no_node) {
                    return (at(ab) - at(a0) - at(b0) + j0) / (static_cast<double>(sa * sb) * ha * hb);
                }
            }
        }
        return 0.0;
    }

    const StateGrid& grid_;
    std::span<const double> values_;
};

std::array<double, 3> as_array(const Vec3& v) { return {v.x, v.y, v.z}; }

// Drift of the controlled qubit filter without the laser terms.
Vec3 free_drift(Model model, const BlochVector& p, const ModelParams& params)
{
    return model == Model::CountingQubit ? counting_drift(p, {}, params) : diffusive_drift(p, {});
}

// Laser part of the drift is u+ * plus_dir + u- * minus_dir.
Vec3 plus_direction(const BlochVector& p) { return {-2.0 * p.z, 0.0, 2.0 * p.x}; }
Vec3 minus_direction(const BlochVector& p) { return {0.0, 2.0 * p.z, -2.0 * p.y}; }

double courant(const std::array<double, 3>& v, const StateGrid& grid, double delta)
{
    double c = 0.0;
    for (std::size_t a = 0; a < grid.dims(); ++a) {
        c += std::abs(v[a]) / grid.spacing(a);
    }
    return c * delta;
}

std::string node_label(const StateGrid& grid, std::size_t idx, std::size_t slice)
{
    std::ostringstream os;
    const Vec3 p = grid.point(idx);
    os << "node " << idx << " (";
    if (grid.dims() == 1) {
        os << "theta=" << p.x;
    } else {
        os << p.x << ", " << p.y << ", " << p.z;
    }
    os << "), slice " << slice;
    return os.str();
}

std::vector<double> control_grid(const GridSpec& spec)
{
    if (spec.control_nodes == 1) {
        return {0.0};
    }
    std::vector<double> c(spec.control_nodes);
    const double step = 2.0 * spec.u_max / static_cast<double>(spec.control_nodes - 1);
    for (std::size_t i = 0; i < spec.control_nodes; ++i) {
        c[i] = -spec.u_max + step * static_cast<double>(i);
    }
    // keep the exact zero control on odd grids
    if (spec.control_nodes % 2 == 1) {
        c[spec.control_nodes / 2] = 0.0;
    }
    return c;
}

} // namespace

ControlPair optimal_controls_from_gradient(const BlochVector& p, const Vec3& grad, std::optional<double> u_max)
{
    ControlPair u{p.z * grad.x - p.x * grad.z, p.y * grad.z - p.z * grad.y};
    if (u_max) {
        u.u_plus = std::clamp(u.u_plus, -*u_max, *u_max);
        u.u_minus = std::clamp(u.u_minus, -*u_max, *u_max);
    }
    return u;
}

double diffusion_second_order(const BlochVector& p, const Hessian3& H, const ModelParams& params)
{
    const Vec3 b = diffusive_diffusion(p, params);
    return 0.5 * (b.x * b.x * H.xx + b.y * b.y * H.yy + b.z * b.z * H.zz) +
           b.x * b.y * H.xy + b.x * b.z * H.xz + b.y * b.z * H.yz;
}

double hjb_rhs_diffusive(const BlochVector& p, const Vec3& grad, const Hessian3& hess, const ModelParams& params)
{
    const double sq_plus = p.x * grad.z - p.z * grad.x;
    const double sq_minus = p.z * grad.y - p.y * grad.z;
    return dot(diffusive_drift(p, {}), grad) + diffusion_second_order(p, hess, params) -
           sq_plus * sq_plus - sq_minus * sq_minus;
}

double hjb_rhs_counting(const BlochVector& p, const Vec3& grad, double J_here, double J_ground,
                        const ModelParams& params)
{
    const double sq_plus = p.x * grad.z - p.z * grad.x;
    const double sq_minus = p.z * grad.y - p.y * grad.z;
    return jump_intensity(p, params) * (J_ground - J_here) + dot(counting_drift(p, {}, params), grad) -
           sq_plus * sq_plus - sq_minus * sq_minus;
}

double hjb_rhs_angle(double d1, double d2, const ModelParams& params)
{
    return -d1 * d1 + 2.0 * params.alpha() * params.alpha() * d2;
}

// ---------------------------------------------------------------------------

ValueGrid::ValueGrid(GridSpec spec, ModelParams params)
    : spec_(std::move(spec)), params_(params), grid_(spec_)
{
    values_.assign(slices() * nodes(), 0.0);
    controls_.assign(slices() * nodes() * control_components(), 0.0);
}

std::span<double> ValueGrid::values(std::size_t n)
{
    return std::span<double>(values_).subspan(n * nodes(), nodes());
}

std::span<const double> ValueGrid::values(std::size_t n) const
{
    return std::span<const double>(values_).subspan(n * nodes(), nodes());
}

std::span<double> ValueGrid::controls(std::size_t n)
{
    const std::size_t w = nodes() * control_components();
    return std::span<double>(controls_).subspan(n * w, w);
}

std::span<const double> ValueGrid::controls(std::size_t n) const
{
    const std::size_t w = nodes() * control_components();
    return std::span<const double>(controls_).subspan(n * w, w);
}

double ValueGrid::value_at(std::size_t n, const ModelState& state) const
{
    if (n >= slices()) {
        throw std::out_of_range("ValueGrid::value_at: slice index out of range");
    }
    const Vec3 q = std::holds_alternative<AngleState>(state)
                       ? Vec3{std::get<AngleState>(state).theta, 0.0, 0.0}
                       : std::get<BlochVector>(state);
    return grid_.interpolate(values(n).data(), q);
}

std::vector<double> terminal_slice(const StateGrid& grid, Model model)
{
    std::vector<double> out(grid.size());
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const Vec3 p = grid.point(idx);
        out[idx] = model == Model::AngleLQ ? p.x * p.x : 1.0 - p.z;
    }
    grid.fill_masked(out);
    return out;
}

void check_stability(const GridSpec& spec, const ModelParams& params)
{
    if (spec.steps == 0) {
        return; // nothing to step
    }
    const StateGrid grid(spec);
    double max_diffusion = 0.0;
    if (spec.model == Model::AngleLQ) {
        max_diffusion = 2.0 * params.alpha() * params.alpha();
    } else if (spec.model == Model::DiffusiveQubit) {
        for (std::size_t idx = 0; idx < grid.size(); ++idx) {
            if (grid.active(idx)) {
                const Vec3 b = diffusive_diffusion(grid.point(idx), params);
                max_diffusion = std::max(max_diffusion, 0.5 * dot(b, b));
            }
        }
    }
    if (max_diffusion == 0.0) {
        return;
    }
    double h = grid.spacing(0);
    for (std::size_t a = 1; a < grid.dims(); ++a) {
        h = std::min(h, grid.spacing(a));
    }
    const double bound = stability_factor * h * h / max_diffusion;
    if (spec.delta > bound) {
        std::ostringstream os;
        os << "delta = " << spec.delta << " exceeds the explicit-scheme bound " << bound
           << " (h = " << h << ", max diffusion = " << max_diffusion << ")";
        throw StabilityError(os.str());
    }
}

SliceUpdate dp_recursion_step(std::span<const double> next, const GridSpec& spec, const ModelParams& params,
                              std::optional<ControlMode> mode_override, std::size_t slice_index,
                              unsigned threads)
{
    const StateGrid grid(spec);
    if (next.size() != grid.size()) {
        throw std::invalid_argument("dp_recursion_step: slice size does not match the grid");
    }
    const ControlMode mode = mode_override.value_or(spec.mode);
    const bool angle = spec.model == Model::AngleLQ;
    const std::size_t width = angle ? 1 : 2;
    const double delta = spec.delta;
    std::vector<double> ghosted(next.begin(), next.end());
    grid.fill_masked(ghosted);
    const SliceView view(grid, ghosted);
    const std::vector<double> controls = mode == ControlMode::Exhaustive ? control_grid(spec) : std::vector<double>{};
    const double J_ground = angle ? 0.0 : grid.interpolate(next.data(), jump_target({}));
    const double diff_coeff = 2.0 * params.alpha() * params.alpha();

    SliceUpdate out;
    out.values.assign(grid.size(), 0.0);
    out.controls.assign(grid.size() * width, 0.0);

    detail::parallel_for(grid.size(), threads, [&](std::size_t idx) {
        if (!grid.active(idx)) {
            return;
        }
        const double j0 = next[idx];
        const LocalDerivatives d = view.derivatives(idx);
        double rhs = 0.0;
        std::array<double, 3> velocity{0, 0, 0};
        std::array<double, 3> limit{0, 0, 0}; // |v| below which central differences are used
        if (angle) {
            limit[0] = 2.0 * diff_coeff / grid.spacing(0);
        } else if (spec.model == Model::DiffusiveQubit) {
            const auto b = as_array(diffusive_diffusion(grid.point(idx), params));
            for (std::size_t a = 0; a < 3; ++a) {
                limit[a] = b[a] * b[a] / grid.spacing(a);
            }
        }

        // Both modes evaluate the controlled Hamiltonian |u|^2 + v(u) . grad J
        // with the gradient upwinded along v(u); they differ only in how u
        // is chosen.
        if (angle) {
            auto hamiltonian = [&](double B) { return B * B + 2.0 * B * d.upwind({2.0 * B, 0.0, 0.0}, limit).x; };
            double B = -d.central[0];
            double best = hamiltonian(B);
            if (mode == ControlMode::Exhaustive) {
                best = std::numeric_limits<double>::infinity();
                for (double c : controls) {
                    const double val = hamiltonian(c);
                    if (val < best) {
                        best = val;
                        B = c;
                    }
                }
            }
            rhs = best + diff_coeff * d.hess.xx;
            velocity[0] = 2.0 * B;
            out.controls[idx] = B;
        } else {
            const BlochVector p = grid.point(idx);
            const Vec3 f0 = free_drift(spec.model, p, params);
            const Vec3 dir_plus = plus_direction(p);
            const Vec3 dir_minus = minus_direction(p);
            auto hamiltonian = [&](double up, double um, std::array<double, 3>& v) {
                v = as_array(f0 + up * dir_plus + um * dir_minus);
                return up * up + um * um + dot(Vec3{v[0], v[1], v[2]}, d.upwind(v, limit));
            };
            ControlPair u = optimal_controls_from_gradient(p, d.central_gradient());
            double best = hamiltonian(u.u_plus, u.u_minus, velocity);
            if (mode == ControlMode::Exhaustive) {
                best = std::numeric_limits<double>::infinity();
                std::array<double, 3> v{};
                for (double up : controls) {
                    for (double um : controls) {
                        const double val = hamiltonian(up, um, v);
                        if (val < best) {
                            best = val;
                            u = {up, um};
                            velocity = v;
                        }
                    }
                }
            }
            rhs = best + (spec.model == Model::DiffusiveQubit ? diffusion_second_order(p, d.hess, params)
                                                              : jump_intensity(p, params) * (J_ground - j0));
            out.controls[2 * idx] = u.u_plus;
            out.controls[2 * idx + 1] = u.u_minus;
        }

        double rate = courant(velocity, grid, delta);
        if (spec.model == Model::CountingQubit) {
            rate += jump_intensity(grid.point(idx), params) * delta;
        }
        if (rate > 1.0) {
            std::ostringstream os;
            os << "Courant number " << rate << " exceeds 1 at " << node_label(grid, idx, slice_index);
            throw StabilityError(os.str());
        }
        const double value = j0 + delta * rhs;
        if (!std::isfinite(value)) {
            throw NumericalError("non-finite value at " + node_label(grid, idx, slice_index));
        }
        out.values[idx] = value;
    });

    grid.fill_masked(out.values);
    grid.fill_masked(out.controls, width);
    return out;
}

ValueGrid solve_backward(const GridSpec& spec, const ModelParams& params, unsigned threads)
{
    spec.validate(params);
    check_stability(spec, params);

    ValueGrid vg(spec, params);
    const std::size_t N = spec.steps;
    const std::vector<double> terminal = terminal_slice(vg.grid(), spec.model);
    std::copy(terminal.begin(), terminal.end(), vg.values(N).begin());

    // control implied by the terminal cost itself; with a zero step the
    // update is a pure argmin and cannot trip the Courant check
    {
        GridSpec still = spec;
        still.delta = 0.0;
        const SliceUpdate u = dp_recursion_step(vg.values(N), still, params, std::nullopt, N, threads);
        std::copy(u.controls.begin(), u.controls.end(), vg.controls(N).begin());
    }
    for (std::size_t n = N; n-- > 0;) {
        const SliceUpdate u = dp_recursion_step(vg.values(n + 1), spec, params, std::nullopt, n, threads);
        std::copy(u.values.begin(), u.values.end(), vg.values(n).begin());
        std::copy(u.controls.begin(), u.controls.end(), vg.controls(n).begin());
    }
    return vg;
}

Policy extract_policy(std::shared_ptr<const ValueGrid> vg)
{
    if (!vg) {
        throw std::invalid_argument("extract_policy: null value grid");
    }
    const double T = vg->spec().steps == 0 ? vg->params().horizon()
                                           : static_cast<double>(vg->spec().steps) * vg->spec().delta;
    auto slice_for = [vg, T](double t) {
        constexpr double slack = 1e-9;
        if (!(t >= -slack * T && t <= T * (1.0 + slack))) {
            throw std::out_of_range("grid policy queried outside [0, T]");
        }
        const std::size_t N = vg->spec().steps;
        if (N == 0) {
            return std::size_t{0};
        }
        const double s = std::max(0.0, t / vg->spec().delta + slack);
        return std::min(N, static_cast<std::size_t>(std::floor(s)));
    };

    Policy::QubitLaw qubit;
    Policy::AngleLaw angle;
    if (is_qubit_model(vg->spec().model)) {
        qubit = [vg, slice_for](double t, const BlochVector& p) {
            const auto c = vg->controls(slice_for(t));
            return ControlPair{vg->grid().interpolate(c.data(), p, 2, 0),
                               vg->grid().interpolate(c.data(), p, 2, 1)};
        };
    } else {
        angle = [vg, slice_for](double t, const AngleState& s) {
            const auto c = vg->controls(slice_for(t));
            return vg->grid().interpolate(c.data(), {s.theta, 0.0, 0.0});
        };
    }
    Policy policy("grid", std::move(qubit), std::move(angle));
    if (vg->spec().mode == ControlMode::Exhaustive) {
        return policy.with_box(vg->spec().u_max);
    }
    return policy;
}

} // namespace qfc
