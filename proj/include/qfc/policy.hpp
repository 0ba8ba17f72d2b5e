#pragma once

#include <functional>
#include <optional>
#include <string>

#include "qfc/filter_core.hpp"
#include "qfc/model.hpp"

namespace qfc {

/// Feedback law mapping (t, filtered state) to controls. A policy may serve
/// the qubit models (laser quadratures), the angle model (field B), or both.
class Policy {
public:
    using QubitLaw = std::function<ControlPair(double, const BlochVector&)>;
    using AngleLaw = std::function<double(double, const AngleState&)>;

    Policy(std::string name, QubitLaw qubit, AngleLaw angle);

    static Policy zero();
    /// Constant quadratures on the qubit models.
    static Policy constant(ControlPair u);
    /// Constant field on the angle model.
    static Policy constant_field(double B);
    /// Closed-form optimal field -2 theta / (4 (T - t) + 1).
    static Policy lq_closed_form(double horizon);

    const std::string& name() const { return name_; }
    bool supports(Model m) const;

    /// Clamps every returned control component into [-u_max, u_max].
    Policy with_box(double u_max) const;
    std::optional<double> box() const { return u_max_; }

    ControlPair control(double t, const BlochVector& p) const;
    double field(double t, const AngleState& s) const;

private:
    std::string name_;
    QubitLaw qubit_;
    AngleLaw angle_;
    std::optional<double> u_max_;
};

} // namespace qfc
