#pragma once

// State types and right-hand-side coefficients of the three filtered
// models: the homodyne-monitored qubit, the photon-counted qubit and the
// linear cavity (angle) model.

#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Core>

namespace qfc {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline bool is_finite(const Vec3& a)
{
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Polarization vector of a qubit state, rho = (1 + sigma(p)) / 2.
using BlochVector = Vec3;

/// 2x2 complex density matrix. Row/column 0 is the sigma_z-up level.
using DensityMatrix = Eigen::Matrix2cd;

/// Laser quadratures u+ = kappa_f Re u(t), u- = kappa_f Im u(t).
struct ControlPair {
    double u_plus = 0.0;
    double u_minus = 0.0;

    double norm_sq() const { return u_plus * u_plus + u_minus * u_minus; }
    friend bool operator==(const ControlPair&, const ControlPair&) = default;
};

/// Physical constants. The side and forward decay rates add up to one.
class ModelParams {
public:
    ModelParams(double kappa_s_sq, double kappa_f_sq, double alpha, double horizon_T);

    /// kappa_f^2 is taken as 1 - kappa_s^2.
    static ModelParams with_side_rate(double kappa_s_sq, double alpha = 0.5, double horizon_T = 1.0);

    double kappa_s_sq() const { return kappa_s_sq_; }
    double kappa_f_sq() const { return kappa_f_sq_; }
    double kappa_s() const { return std::sqrt(kappa_s_sq_); }
    double kappa_f() const { return std::sqrt(kappa_f_sq_); }
    double alpha() const { return alpha_; }
    double horizon() const { return horizon_T_; }

    /// With kappa_f = 0 the laser cannot act on the qubit.
    bool controls_degenerate() const { return kappa_f_sq_ == 0.0; }

private:
    double kappa_s_sq_;
    double kappa_f_sq_;
    double alpha_;
    double horizon_T_;
};

/// Circle coordinates of the cavity model: Px = r cos theta, Py = r sin theta.
struct AngleState {
    double theta = 0.0;
    double r = 1.0;
};

/// Maps an angle to [-pi, pi).
double wrap_angle(double theta);

inline constexpr double default_ball_tolerance = 1e-6;

/// Radially projects p onto the unit sphere when its norm exceeds 1 + tolerance.
BlochVector project_to_ball(const BlochVector& p, double tolerance = default_ball_tolerance);

// ---------------------------------------------------------------------------
// Density-matrix picture
// ---------------------------------------------------------------------------

DensityMatrix bloch_to_density(const BlochVector& p, double ball_tolerance = default_ball_tolerance);

/// Inverse of bloch_to_density. Rejects input that is not Hermitian with unit
/// trace to within `tolerance`.
BlochVector density_to_bloch(const DensityMatrix& rho, double tolerance = 1e-10);

/// Bloch components of a traceless Hermitian matrix M = sigma(v) / 2.
Vec3 bloch_image(const DensityMatrix& traceless);

/// Lindblad generator with laser drive and decay into the forward and side
/// channels. The Hamiltonian carries the sign that reproduces the
/// parameterized filter drift, H = -(u- sigma_x + u+ sigma_y).
DensityMatrix lindblad(const DensityMatrix& rho, const ControlPair& u, const ModelParams& params);

// ---------------------------------------------------------------------------
// Bloch-vector coefficients
// ---------------------------------------------------------------------------

/// dt-coefficient of the homodyne filter. Also the Bloch image of L(rho(p)).
Vec3 diffusive_drift(const BlochVector& p, const ControlPair& u);

/// dW-coefficient of the homodyne filter.
Vec3 diffusive_diffusion(const BlochVector& p, const ModelParams& params);

/// Tr(V_s rho + rho V_s^*) = kappa_s Px; drift of the photocurrent Y.
double observation_drift(const BlochVector& p, const ModelParams& params);

/// Full dt-coefficient of the counting filter, compensator included.
Vec3 counting_drift(const BlochVector& p, const ControlPair& u, const ModelParams& params);

/// Photon detection rate (kappa_s^2 / 2)(1 + Pz).
double jump_intensity(const BlochVector& p, const ModelParams& params);

/// State right after a detection: the ground state, whatever p was.
BlochVector jump_target(const BlochVector& p);

struct SdeCoefficients {
    double drift = 0.0;
    double diffusion = 0.0;
};

/// d theta = 2 B dt + 2 alpha dW.
SdeCoefficients angle_coefficients(const AngleState& state, double B, const ModelParams& params);

struct CavityCoefficients {
    Vec3 drift;
    Vec3 diffusion;
};

/// Cartesian form of the cavity model, i.e. the angle SDE seen on the Bloch ball.
CavityCoefficients cavity_coefficients(const BlochVector& p, double B, const ModelParams& params);

} // namespace qfc
