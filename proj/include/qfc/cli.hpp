#pragma once

// Command-line front end: `simulate`, `solve`, `evaluate`, `compare`, `lq`.
// Settings come from flags and an optional INI file (--config); flags win.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfc/bellman_solver.hpp"
#include "qfc/grid.hpp"
#include "qfc/policy.hpp"
#include "qfc/trajectory_sim.hpp"

namespace qfc::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_runtime = 1;
inline constexpr int exit_config = 2;

/// Invalid or inconsistent configuration; field() names the setting.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    std::string model = "angle-lq";
    double kappa_s_sq = 1.0;
    std::optional<double> kappa_f_sq; ///< defaults to 1 - kappa_s_sq
    double alpha = 0.5;
    double horizon = 1.0;

    std::vector<double> p0{1.0, 0.0, 0.0};
    double theta0 = 1.0;
    double dt = 1e-3;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 0; ///< 0: QFC_THREADS or the hardware concurrency
    double ball_tolerance = default_ball_tolerance;
    bool no_timestamps = false;

    std::string policy = "zero";       ///< simulate
    std::vector<std::string> policies; ///< compare, at least two

    std::vector<std::size_t> nodes;
    std::vector<double> lower;
    std::vector<double> upper;
    double delta = 1e-4;
    std::optional<std::size_t> steps;
    std::string mode = "closed-form";
    std::optional<double> u_max;
    std::optional<std::size_t> control_nodes;
    std::string grid_path;

    std::string out;
    std::string trajectory_out;
    std::string report_out;

    std::vector<double> t_mesh{0.0, 0.5, 1.0};
    std::vector<double> theta_mesh{-1.0, 0.0, 1.0};

    /// Which model settings were given explicitly (checked against loaded grids).
    bool model_given = false;
    bool params_given = false;
};

Model model_of(const ExperimentConfig& cfg);
ModelParams params_of(const ExperimentConfig& cfg);
InitialState initial_state_of(const ExperimentConfig& cfg, Model model);
GridSpec grid_spec_of(const ExperimentConfig& cfg, const ModelParams& params);
SimOptions sim_options_of(const ExperimentConfig& cfg);

/// zero | constant:<values> | constant:B=<value> | lq-closed-form | grid:<path>
Policy make_policy(const std::string& spec, Model model, const ModelParams& params);

/// Loads a .vgrid and checks it against the configured model and parameters.
std::shared_ptr<const ValueGrid> load_grid_for(const std::string& path, Model model, const ModelParams& params,
                                               bool model_given, bool params_given);

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_solve(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_lq(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qfc::cli
