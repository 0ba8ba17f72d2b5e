#pragma once

// State grids for the backward solvers: a uniform 1-D grid over the angle
// interval, or a uniform Cartesian grid on a cube with the nodes outside the
// unit ball masked out.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfc/filter_core.hpp"
#include "qfc/model.hpp"

namespace qfc {

/// Invalid grid configuration. field() names the offending setting.
class GridSpecError : public std::invalid_argument {
public:
    GridSpecError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Time step too large for the explicit scheme.
class StabilityError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// NaN or infinity produced during the backward sweep.
class NumericalError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ControlMode {
    ClosedForm, ///< completed-squares control from the value gradient
    Exhaustive, ///< minimization over a uniform control grid
};

std::string_view control_mode_name(ControlMode m);
ControlMode parse_control_mode(std::string_view name);

/// Ratio between the time step and h^2 / max-diffusion allowed by the
/// explicit scheme.
inline constexpr double stability_factor = 0.25;

struct GridSpec {
    Model model = Model::AngleLQ;
    /// Per-axis bounds; one axis for the angle model, three for the qubits.
    std::array<double, 3> lower{-1.0, -1.0, -1.0};
    std::array<double, 3> upper{1.0, 1.0, 1.0};
    std::array<std::size_t, 3> nodes{21, 21, 21};
    double delta = 1e-4;   ///< backward time step
    std::size_t steps = 0; ///< N, with N * delta = T
    ControlMode mode = ControlMode::ClosedForm;
    double u_max = 5.0;    ///< control box half-width for exhaustive mode
    std::size_t control_nodes = 41; ///< grid points per control axis; 1 means the single control 0

    std::size_t dims() const { return model == Model::AngleLQ ? 1 : 3; }

    /// Angle model on [-pi, pi] with both ends as nodes and the box [-20, 20].
    static GridSpec angle(std::size_t nodes, double delta, std::size_t steps);
    /// Cube [-1, 1]^3 with `nodes` per axis and the box [-5, 5]^2.
    static GridSpec qubit(Model model, std::size_t nodes, double delta, std::size_t steps);

    /// Throws GridSpecError unless the spec is well formed and N * delta = T.
    void validate(const ModelParams& params) const;
};

/// Node geometry of a GridSpec.
class StateGrid {
public:
    explicit StateGrid(const GridSpec& spec);

    std::size_t dims() const { return dims_; }
    std::size_t size() const { return size_; }
    std::size_t count(std::size_t axis) const { return n_[axis]; }
    double spacing(std::size_t axis) const { return h_[axis]; }
    double lower(std::size_t axis) const { return lo_[axis]; }
    double upper(std::size_t axis) const { return hi_[axis]; }

    /// Row-major flat index, first axis slowest.
    std::size_t index(std::size_t i, std::size_t j = 0, std::size_t k = 0) const
    {
        return (i * n_[1] + j) * n_[2] + k;
    }
    std::array<std::size_t, 3> unflatten(std::size_t idx) const;

    double coordinate(std::size_t axis, std::size_t i) const { return lo_[axis] + h_[axis] * static_cast<double>(i); }
    Vec3 point(std::size_t idx) const;

    /// Inside the unit ball (always true on the angle grid).
    bool active(std::size_t idx) const { return active_[idx]; }
    std::size_t active_count() const { return active_count_; }
    /// Nearest active node; identity for active nodes.
    std::size_t nearest_active(std::size_t idx) const { return nearest_[idx]; }

    /// Copies every masked entry from its nearest active node.
    void fill_masked(std::vector<double>& slice, std::size_t components = 1) const;

    /// Multilinear interpolation of a slice, with the query clamped into the
    /// grid bounds. `stride`/`offset` select one component of interleaved data.
    double interpolate(const double* slice, const Vec3& q, std::size_t stride = 1, std::size_t offset = 0) const;

private:
    std::size_t dims_;
    std::array<std::size_t, 3> n_{1, 1, 1};
    std::array<double, 3> lo_{0, 0, 0};
    std::array<double, 3> hi_{0, 0, 0};
    std::array<double, 3> h_{1, 1, 1};
    std::size_t size_ = 0;
    std::vector<bool> active_;
    std::vector<std::size_t> nearest_;
    std::size_t active_count_ = 0;
};

} // namespace qfc
