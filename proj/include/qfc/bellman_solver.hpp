#pragma once

// Backward solution of the dynamic-programming recursion
//
//   J(n, x) = min_u E[ |u|^2 delta + J(n + 1, x') ],   J(N, .) = terminal cost,
//
// in its explicit finite-difference form: J(n) = J(n + 1) + delta * H[J(n + 1)]
// where H is the Bellman/HJB right-hand side. First derivatives are central
// where the local cell Peclet number allows it and upwind along the
// controlled drift otherwise; second derivatives are central. Nodes outside
// the unit ball act as ghost nodes holding the value of the nearest node
// inside, and one-sided stencils are used only at the edge of the cube.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qfc/filter_core.hpp"
#include "qfc/grid.hpp"
#include "qfc/model.hpp"
#include "qfc/policy.hpp"

namespace qfc {

/// Symmetric 3x3 matrix of second derivatives.
struct Hessian3 {
    double xx = 0.0, yy = 0.0, zz = 0.0;
    double xy = 0.0, xz = 0.0, yz = 0.0;

    static Hessian3 outer(const Vec3& v)
    {
        return {v.x * v.x, v.y * v.y, v.z * v.z, v.x * v.y, v.x * v.z, v.y * v.z};
    }
};

/// Completed-squares minimizer u+ = Pz dJ/dx - Px dJ/dz, u- = Py dJ/dz - Pz dJ/dy,
/// clamped into [-u_max, u_max]^2 when a box is given.
ControlPair optimal_controls_from_gradient(const BlochVector& p, const Vec3& grad,
                                          std::optional<double> u_max = std::nullopt);

/// (1/2) b^T H b with b = diffusive_diffusion(p): the Ito second-order term of
/// the homodyne filter, assembled from the diffusion vector.
double diffusion_second_order(const BlochVector& p, const Hessian3& hess, const ModelParams& params);

/// -dJ/dt of the homodyne HJB equation (control already minimized out).
double hjb_rhs_diffusive(const BlochVector& p, const Vec3& grad, const Hessian3& hess,
                         const ModelParams& params);

/// -dJ/dt of the counting HJB equation; `J_ground` is J at the post-jump state.
double hjb_rhs_counting(const BlochVector& p, const Vec3& grad, double J_here, double J_ground,
                        const ModelParams& params);

/// -dJ/dt = -(dJ/dtheta)^2 + 2 alpha^2 d2J/dtheta2.
double hjb_rhs_angle(double d1, double d2, const ModelParams& params);

/// Cost-to-go on a grid: N + 1 value slices and the control recorded at each
/// slice. Slice n < N holds the control used on [t_n, t_n+1) (computed from
/// slice n + 1); slice N holds the control implied by the terminal cost.
class ValueGrid {
public:
    ValueGrid(GridSpec spec, ModelParams params);

    const GridSpec& spec() const { return spec_; }
    const ModelParams& params() const { return params_; }
    const StateGrid& grid() const { return grid_; }

    std::size_t slices() const { return spec_.steps + 1; }
    std::size_t nodes() const { return grid_.size(); }
    /// 1 (field B) for the angle model, 2 (u+, u-) for the qubit models.
    std::size_t control_components() const { return is_qubit_model(spec_.model) ? 2 : 1; }
    double time(std::size_t n) const { return static_cast<double>(n) * spec_.delta; }

    std::span<double> values(std::size_t n);
    std::span<const double> values(std::size_t n) const;
    std::span<double> controls(std::size_t n);
    std::span<const double> controls(std::size_t n) const;

    std::vector<double>& raw_values() { return values_; }
    const std::vector<double>& raw_values() const { return values_; }
    std::vector<double>& raw_controls() { return controls_; }
    const std::vector<double>& raw_controls() const { return controls_; }

    /// Interpolated J at slice n. Angle states use theta as the first axis.
    double value_at(std::size_t n, const ModelState& state) const;

private:
    GridSpec spec_;
    ModelParams params_;
    StateGrid grid_;
    std::vector<double> values_;
    std::vector<double> controls_;
};

/// Result of one backward step.
struct SliceUpdate {
    std::vector<double> values;
    std::vector<double> controls; ///< interleaved per node, control_components() wide
};

/// Terminal cost evaluated at every node.
std::vector<double> terminal_slice(const StateGrid& grid, Model model);

/// Checks delta <= stability_factor * h^2 / max-diffusion; throws StabilityError.
/// A spec with zero steps always passes.
void check_stability(const GridSpec& spec, const ModelParams& params);

/// One explicit backward step J(n + 1) -> J(n) under the spec's control mode
/// (`mode` overrides it). Throws NumericalError on non-finite values and
/// StabilityError when the advective Courant number exceeds one.
SliceUpdate dp_recursion_step(std::span<const double> next, const GridSpec& spec,
                              const ModelParams& params,
                              std::optional<ControlMode> mode = std::nullopt,
                              std::size_t slice_index = 0, unsigned threads = 1);

/// Full backward sweep from the terminal cost.
ValueGrid solve_backward(const GridSpec& spec, const ModelParams& params, unsigned threads = 1);

/// Feedback policy interpolating the stored controls: slice floor(t / delta)
/// (clamped to N), multilinear in the state. Queries outside [0, T] throw.
Policy extract_policy(std::shared_ptr<const ValueGrid> vg);

} // namespace qfc
