#include <cmath>
#include <cstdlib>
#include <memory>
#include <sstream>

#include "qfc/cli.hpp"
#include "qfc/value_grid_io.hpp"

namespace qfc::cli {

namespace {

double parse_number(const std::string& text, const std::string& field)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw ConfigError(field, "'" + text + "' is not a finite number");
    }
    return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& field)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number(item, field));
    }
    return out;
}

} // namespace

Model model_of(const ExperimentConfig& cfg)
{
    try {
        return parse_model(cfg.model);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
}

ModelParams params_of(const ExperimentConfig& cfg)
{
    try {
        return ModelParams(cfg.kappa_s_sq, cfg.kappa_f_sq.value_or(1.0 - cfg.kappa_s_sq), cfg.alpha, cfg.horizon);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("params", e.what());
    }
}

InitialState initial_state_of(const ExperimentConfig& cfg, Model model)
{
    if (model == Model::AngleLQ) {
        if (!std::isfinite(cfg.theta0)) {
            throw ConfigError("theta0", "must be finite");
        }
        return AngleState{cfg.theta0};
    }
    if (cfg.p0.size() != 3) {
        throw ConfigError("p0", "expected three components");
    }
    const BlochVector p{cfg.p0[0], cfg.p0[1], cfg.p0[2]};
    if (!is_finite(p) || norm(p) > 1.0 + cfg.ball_tolerance) {
        throw ConfigError("p0", "must be a finite point of the unit ball");
    }
    return p;
}

GridSpec grid_spec_of(const ExperimentConfig& cfg, const ModelParams& params)
{
    const Model model = model_of(cfg);
    const bool angle = model == Model::AngleLQ;
    GridSpec spec = angle ? GridSpec::angle(401, cfg.delta, 0) : GridSpec::qubit(model, 21, cfg.delta, 0);
    const std::size_t dims = spec.dims();

    if (!cfg.nodes.empty()) {
        if (cfg.nodes.size() == 1) {
            for (std::size_t a = 0; a < dims; ++a) {
                spec.nodes[a] = cfg.nodes[0];
            }
        } else if (cfg.nodes.size() == dims) {
            for (std::size_t a = 0; a < dims; ++a) {
                spec.nodes[a] = cfg.nodes[a];
            }
        } else {
            throw ConfigError("nodes", "expected 1 or " + std::to_string(dims) + " values");
        }
    }
    auto set_bounds = [&](const std::vector<double>& v, std::array<double, 3>& target, const char* name) {
        if (v.empty()) {
            return;
        }
        if (v.size() != dims) {
            throw ConfigError(name, "expected " + std::to_string(dims) + " values, got " + std::to_string(v.size()));
        }
        for (std::size_t a = 0; a < dims; ++a) {
            target[a] = v[a];
        }
    };
    set_bounds(cfg.lower, spec.lower, "lower");
    set_bounds(cfg.upper, spec.upper, "upper");

    spec.mode = parse_control_mode(cfg.mode);
    if (cfg.u_max) {
        spec.u_max = *cfg.u_max;
    }
    if (cfg.control_nodes) {
        spec.control_nodes = *cfg.control_nodes;
    }
    if (!(cfg.delta > 0.0) || !std::isfinite(cfg.delta)) {
        throw ConfigError("delta", "must be finite and positive");
    }
    spec.delta = cfg.delta;
    if (cfg.steps) {
        spec.steps = *cfg.steps;
    } else {
        const double n = params.horizon() / cfg.delta;
        spec.steps = static_cast<std::size_t>(std::llround(n));
    }
    spec.validate(params);
    return spec;
}

SimOptions sim_options_of(const ExperimentConfig& cfg)
{
    if (!(cfg.ball_tolerance >= 0.0)) {
        throw ConfigError("ball-tolerance", "must be nonnegative");
    }
    return SimOptions{cfg.ball_tolerance};
}

Policy make_policy(const std::string& spec, Model model, const ModelParams& params)
{
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    Policy policy = Policy::zero();
    if (kind == "zero" && colon == std::string::npos) {
        policy = Policy::zero();
    } else if (kind == "lq-closed-form" && colon == std::string::npos) {
        policy = Policy::lq_closed_form(params.horizon());
    } else if (kind == "constant") {
        std::string values = arg;
        if (values.rfind("B=", 0) == 0) {
            if (model != Model::AngleLQ) {
                throw ConfigError("policy", "'" + spec + "' sets a field B, which only the angle model has");
            }
            values = values.substr(2);
        }
        const std::vector<double> v = parse_list(values, "policy");
        if (model == Model::AngleLQ) {
            if (v.size() != 1) {
                throw ConfigError("policy", "'" + spec + "' needs one field value");
            }
            policy = Policy::constant_field(v[0]);
        } else {
            if (v.size() != 2) {
                throw ConfigError("policy", "'" + spec + "' needs two values u+,u-");
            }
            policy = Policy::constant(ControlPair{v[0], v[1]});
        }
    } else if (kind == "grid" && !arg.empty()) {
        policy = extract_policy(load_grid_for(arg, model, params, true, true));
    } else {
        throw ConfigError("policy", "unknown policy '" + spec + "'");
    }
    if (!policy.supports(model)) {
        throw ConfigError("policy", "'" + spec + "' is not defined for model " + std::string(model_name(model)));
    }
    return policy;
}

std::shared_ptr<const ValueGrid> load_grid_for(const std::string& path, Model model, const ModelParams& params,
                                               bool model_given, bool params_given)
{
    std::shared_ptr<const ValueGrid> vg;
    try {
        vg = std::make_shared<const ValueGrid>(load_value_grid(path));
    } catch (const FormatError& e) {
        throw ConfigError("grid", path + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError("grid", e.what());
    }
    if (model_given && vg->spec().model != model) {
        throw ConfigError("model", "grid " + path + " was solved for " + std::string(model_name(vg->spec().model)) +
                                       ", not " + std::string(model_name(model)));
    }
    if (params_given) {
        const ModelParams& g = vg->params();
        // only the parameters the model actually uses are compared
        const bool same_rates = vg->spec().model == Model::AngleLQ ? g.alpha() == params.alpha()
                                                                   : g.kappa_s_sq() == params.kappa_s_sq();
        const bool same_horizon = std::abs(g.horizon() - params.horizon()) <= 1e-12 * params.horizon();
        if (!same_rates || !same_horizon) {
            throw ConfigError("params", "grid " + path + " was solved with different model parameters or horizon");
        }
    }
    return vg;
}

} // namespace qfc::cli
