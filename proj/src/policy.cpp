#include "qfc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qfc/lq_exact.hpp"

namespace qfc {

namespace {

double clamp_component(double v, const std::optional<double>& u_max)
{
    return u_max ? std::clamp(v, -*u_max, *u_max) : v;
}

} // namespace

Policy::Policy(std::string name, QubitLaw qubit, AngleLaw angle)
    : name_(std::move(name)), qubit_(std::move(qubit)), angle_(std::move(angle))
{
}

Policy Policy::zero()
{
    return Policy("zero", [](double, const BlochVector&) { return ControlPair{}; },
                  [](double, const AngleState&) { return 0.0; });
}

Policy Policy::constant(ControlPair u)
{
    return Policy("constant", [u](double, const BlochVector&) { return u; }, nullptr);
}

Policy Policy::constant_field(double B)
{
    return Policy("constant", nullptr, [B](double, const AngleState&) { return B; });
}

Policy Policy::lq_closed_form(double horizon)
{
    return Policy("lq-closed-form", nullptr, [horizon](double t, const AngleState& s) {
        return lq::optimal_B(std::min(t, horizon), s.theta, horizon);
    });
}

bool Policy::supports(Model m) const
{
    return is_qubit_model(m) ? static_cast<bool>(qubit_) : static_cast<bool>(angle_);
}

Policy Policy::with_box(double u_max) const
{
    if (!(u_max >= 0.0)) {
        throw std::invalid_argument("control box half-width must be non-negative");
    }
    Policy p = *this;
    p.u_max_ = u_max;
    return p;
}

ControlPair Policy::control(double t, const BlochVector& p) const
{
    if (!qubit_) {
        throw std::logic_error("policy '" + name_ + "' does not drive the qubit models");
    }
    ControlPair u = qubit_(t, p);
    if (!std::isfinite(u.u_plus) || !std::isfinite(u.u_minus)) {
        throw std::runtime_error("policy '" + name_ + "' returned a non-finite control");
    }
    return {clamp_component(u.u_plus, u_max_), clamp_component(u.u_minus, u_max_)};
}

double Policy::field(double t, const AngleState& s) const
{
    if (!angle_) {
        throw std::logic_error("policy '" + name_ + "' does not drive the angle model");
    }
    const double B = angle_(t, s);
    if (!std::isfinite(B)) {
        throw std::runtime_error("policy '" + name_ + "' returned a non-finite field");
    }
    return clamp_component(B, u_max_);
}

} // namespace qfc
