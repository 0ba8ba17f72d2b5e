#include "qfc/filter_core.hpp"

#include <algorithm>
#include <numbers>
#include <string>

namespace qfc {

namespace {

using cd = std::complex<double>;

constexpr double rate_sum_tolerance = 1e-12;

void require_finite(const BlochVector& p, const char* what)
{
    if (!is_finite(p)) {
        throw std::invalid_argument(std::string(what) + ": non-finite Bloch vector");
    }
}

// Lowering operator |up> -> |down>.
DensityMatrix lowering()
{
    DensityMatrix v = DensityMatrix::Zero();
    v(1, 0) = 1.0;
    return v;
}

DensityMatrix dissipator(const DensityMatrix& jump, const DensityMatrix& rho)
{
    const DensityMatrix jd = jump.adjoint();
    const DensityMatrix jdj = jd * jump;
    return jump * rho * jd - 0.5 * (jdj * rho + rho * jdj);
}

} // namespace

ModelParams::ModelParams(double kappa_s_sq, double kappa_f_sq, double alpha, double horizon_T)
    : kappa_s_sq_(kappa_s_sq), kappa_f_sq_(kappa_f_sq), alpha_(alpha), horizon_T_(horizon_T)
{
    if (!(kappa_s_sq >= 0.0 && kappa_s_sq <= 1.0)) {
        throw std::invalid_argument("kappa_s_sq must lie in [0, 1]");
    }
    if (!(kappa_f_sq >= 0.0 && kappa_f_sq <= 1.0)) {
        throw std::invalid_argument("kappa_f_sq must lie in [0, 1]");
    }
    if (std::abs(kappa_s_sq + kappa_f_sq - 1.0) > rate_sum_tolerance) {
        throw std::invalid_argument("kappa_s_sq + kappa_f_sq must equal 1");
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("alpha must be finite and non-negative");
    }
    if (!(horizon_T > 0.0) || !std::isfinite(horizon_T)) {
        throw std::invalid_argument("horizon_T must be finite and positive");
    }
}

ModelParams ModelParams::with_side_rate(double kappa_s_sq, double alpha, double horizon_T)
{
    return ModelParams(kappa_s_sq, 1.0 - kappa_s_sq, alpha, horizon_T);
}

double wrap_angle(double theta)
{
    constexpr double pi = std::numbers::pi;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (theta >= -pi && theta < pi) {
        return theta;
    }
    double w = std::fmod(theta + pi, two_pi);
    if (w < 0.0) {
        w += two_pi;
    }
    w -= pi;
    // fmod can land exactly on +pi after the shift by rounding
    return w >= pi ? w - two_pi : w;
}

BlochVector project_to_ball(const BlochVector& p, double tolerance)
{
    const double n = norm(p);
    if (n > 1.0 + tolerance) {
        return p * (1.0 / n);
    }
    return p;
}

DensityMatrix bloch_to_density(const BlochVector& p, double ball_tolerance)
{
    require_finite(p, "bloch_to_density");
    if (norm(p) > 1.0 + ball_tolerance) {
        throw std::invalid_argument("bloch_to_density: vector lies outside the Bloch ball");
    }
    DensityMatrix rho;
    rho(0, 0) = cd(0.5 * (1.0 + p.z), 0.0);
    rho(0, 1) = cd(0.5 * p.x, -0.5 * p.y);
    rho(1, 0) = cd(0.5 * p.x, 0.5 * p.y);
    rho(1, 1) = cd(0.5 * (1.0 - p.z), 0.0);
    return rho;
}

BlochVector density_to_bloch(const DensityMatrix& rho, double tolerance)
{
    if (!rho.allFinite()) {
        throw std::invalid_argument("density_to_bloch: non-finite entries");
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tolerance) {
        throw std::invalid_argument("density_to_bloch: matrix is not Hermitian");
    }
    if (std::abs(rho.trace() - 1.0) > tolerance) {
        throw std::invalid_argument("density_to_bloch: trace differs from 1");
    }
    return {2.0 * rho(1, 0).real(), 2.0 * rho(1, 0).imag(), rho(0, 0).real() - rho(1, 1).real()};
}

Vec3 bloch_image(const DensityMatrix& m)
{
    return {2.0 * m(1, 0).real(), 2.0 * m(1, 0).imag(), m(0, 0).real() - m(1, 1).real()};
}

DensityMatrix lindblad(const DensityMatrix& rho, const ControlPair& u, const ModelParams& params)
{
    if (!rho.allFinite() || !std::isfinite(u.u_plus) || !std::isfinite(u.u_minus)) {
        throw std::invalid_argument("lindblad: non-finite input");
    }
    const cd i(0.0, 1.0);
    DensityMatrix h;
    h << 0.0, cd(-u.u_minus, u.u_plus), cd(-u.u_minus, -u.u_plus), 0.0;

    const DensityMatrix v = lowering();
    const DensityMatrix v_f = params.kappa_f() * v;
    const DensityMatrix v_s = params.kappa_s() * v;
    return -i * (h * rho - rho * h) + dissipator(v_f, rho) + dissipator(v_s, rho);
}

Vec3 diffusive_drift(const BlochVector& p, const ControlPair& u)
{
    return {-0.5 * p.x - 2.0 * u.u_plus * p.z,
            -0.5 * p.y + 2.0 * u.u_minus * p.z,
            -(1.0 + p.z) + 2.0 * u.u_plus * p.x - 2.0 * u.u_minus * p.y};
}

Vec3 diffusive_diffusion(const BlochVector& p, const ModelParams& params)
{
    const double ks = params.kappa_s();
    return {ks * (1.0 + p.z - p.x * p.x), ks * (-p.x * p.y), ks * (-p.x * (1.0 + p.z))};
}

double observation_drift(const BlochVector& p, const ModelParams& params)
{
    return params.kappa_s() * p.x;
}

Vec3 counting_drift(const BlochVector& p, const ControlPair& u, const ModelParams& params)
{
    const double c = 0.5 * params.kappa_s_sq() * (1.0 + p.z);
    return diffusive_drift(p, u) + c * Vec3{p.x, p.y, 1.0 + p.z};
}

double jump_intensity(const BlochVector& p, const ModelParams& params)
{
    return std::max(0.0, 0.5 * params.kappa_s_sq() * (1.0 + p.z));
}

BlochVector jump_target(const BlochVector&)
{
    return {0.0, 0.0, -1.0};
}

SdeCoefficients angle_coefficients(const AngleState&, double B, const ModelParams& params)
{
    if (!std::isfinite(B)) {
        throw std::invalid_argument("angle_coefficients: non-finite field");
    }
    return {2.0 * B, 2.0 * params.alpha()};
}

CavityCoefficients cavity_coefficients(const BlochVector& p, double B, const ModelParams& params)
{
    const double a = params.alpha();
    return {{-2.0 * a * a * p.x - 2.0 * B * p.y, -2.0 * a * a * p.y + 2.0 * B * p.x, 0.0},
            {-2.0 * a * p.y, 2.0 * a * p.x, 0.0}};
}

} // namespace qfc
