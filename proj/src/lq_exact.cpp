#include "qfc/lq_exact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qfc::lq {

namespace {

// Remaining-horizon factor 4 (T - t) + 1 >= 1.
double horizon_factor(double t, double T)
{
    if (!(t <= T)) {
        throw std::domain_error("lq: time exceeds the horizon");
    }
    return 4.0 * (T - t) + 1.0;
}

} // namespace

double riccati_f(double t, double T)
{
    return 1.0 / horizon_factor(t, T);
}

double g_term(double t, double T, double alpha)
{
    return alpha * alpha * std::log(horizon_factor(t, T));
}

double value(double t, double theta, double T, double alpha)
{
    return theta * theta * riccati_f(t, T) + g_term(t, T, alpha);
}

double value_theta_derivative(double t, double theta, double T)
{
    return 2.0 * theta * riccati_f(t, T);
}

double optimal_B(double t, double theta, double T)
{
    return -2.0 * theta / horizon_factor(t, T);
}

double hjb_residual(const ValueFunction& J, double t, double theta, double T, double alpha, double h)
{
    if (!(h > 0.0)) {
        throw std::invalid_argument("hjb_residual: step must be positive");
    }
    if (t + h > T) {
        throw std::domain_error("hjb_residual: t + h exceeds the horizon");
    }
    const double j0 = J(t, theta);
    const double dt = (J(t + h, theta) - J(t - h, theta)) / (2.0 * h);
    const double jp = J(t, theta + h);
    const double jm = J(t, theta - h);
    const double d1 = (jp - jm) / (2.0 * h);
    const double d2 = (jp - 2.0 * j0 + jm) / (h * h);
    return std::abs(dt - d1 * d1 + 2.0 * alpha * alpha * d2);
}

double hjb_residual(double t, double theta, double T, double alpha, double h)
{
    return hjb_residual([T, alpha](double s, double th) { return value(s, th, T, alpha); },
                        t, theta, T, alpha, h);
}

OdeCheck ode_check(double T, double alpha, double dt)
{
    if (!(dt > 0.0) || !(T > 0.0)) {
        throw std::invalid_argument("ode_check: dt and T must be positive");
    }
    const double a2 = 4.0 * alpha * alpha;
    // state (f, g) in reversed time s = T - t: df/ds = -4 f^2, dg/ds = 4 alpha^2 f
    auto rhs = [a2](double f, double) { return std::pair{-4.0 * f * f, a2 * f}; };

    const auto steps = static_cast<long>(std::ceil(T / dt - 1e-9));
    double f = 1.0;
    double g = 0.0;
    OdeCheck out;
    double s = 0.0;
    for (long k = 0; k < steps; ++k) {
        const double h = std::min(dt, T - s);
        const auto [k1f, k1g] = rhs(f, g);
        const auto [k2f, k2g] = rhs(f + 0.5 * h * k1f, g + 0.5 * h * k1g);
        const auto [k3f, k3g] = rhs(f + 0.5 * h * k2f, g + 0.5 * h * k2g);
        const auto [k4f, k4g] = rhs(f + h * k3f, g + h * k3g);
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        s += h;
        const double t = T - s;
        out.max_f_err = std::max(out.max_f_err, std::abs(f - riccati_f(t, T)));
        out.max_g_err = std::max(out.max_g_err, std::abs(g - g_term(t, T, alpha)));
    }
    return out;
}

LQSolution::LQSolution(double horizon, double alpha) : T_(horizon), alpha_(alpha)
{
    if (!(horizon > 0.0) || !(alpha >= 0.0)) {
        throw std::invalid_argument("LQSolution: need horizon > 0 and alpha >= 0");
    }
}

} // namespace qfc::lq
