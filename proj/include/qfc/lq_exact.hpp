#pragma once

// Exact solution of the linear-quadratic cavity problem
//
//   d theta = 2 B dt + 2 alpha dW,   cost = theta_T^2 + int_t^T B^2 ds,
//
// whose value function is J*(t, theta) = theta^2 f(t) + g(t) with
// f' = 4 f^2, f(T) = 1 and g' = -4 alpha^2 f, g(T) = 0. The angle is treated
// on the real line here.

#include <functional>

namespace qfc::lq {

/// 1 / (4 (T - t) + 1).
double riccati_f(double t, double T);

/// alpha^2 ln(4 (T - t) + 1).
double g_term(double t, double T, double alpha);

double value(double t, double theta, double T, double alpha);

/// Analytic d/dtheta of value().
double value_theta_derivative(double t, double theta, double T);

/// Optimal feedback -2 theta / (4 (T - t) + 1) = -d/dtheta J*.
double optimal_B(double t, double theta, double T);

/// Value function of the form (t, theta) -> J.
using ValueFunction = std::function<double(double, double)>;

/// |dJ/dt - (dJ/dtheta)^2 + 2 alpha^2 d2J/dtheta2| with all derivatives taken
/// by central differences of `J` with step h. Requires t + h <= T.
double hjb_residual(const ValueFunction& J, double t, double theta, double T, double alpha, double h);

/// Residual of the closed-form value function.
double hjb_residual(double t, double theta, double T, double alpha, double h);

struct OdeCheck {
    double max_f_err = 0.0;
    double max_g_err = 0.0;
};

/// Integrates f' = 4 f^2 and g' = -4 alpha^2 f backward from t = T with
/// classical RK4 and reports the sup-norm deviation from the closed forms on
/// the integration grid [0, T].
OdeCheck ode_check(double T, double alpha, double dt);

/// Scalar closed-form solution bound to a horizon and noise strength.
class LQSolution {
public:
    LQSolution(double horizon, double alpha);

    double horizon() const { return T_; }
    double alpha() const { return alpha_; }

    double f(double t) const { return riccati_f(t, T_); }
    double g(double t) const { return g_term(t, T_, alpha_); }
    double value(double t, double theta) const { return lq::value(t, theta, T_, alpha_); }
    double control(double t, double theta) const { return optimal_B(t, theta, T_); }

private:
    double T_;
    double alpha_;
};

} // namespace qfc::lq
