#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "qfc/filter_core.hpp"

namespace qfc {

enum class Model {
    DiffusiveQubit, ///< homodyne-monitored qubit
    CountingQubit,  ///< photon-counted qubit
    AngleLQ,        ///< linear cavity model on the circle
};

std::string_view model_name(Model m);

/// Accepts "diffusive-qubit", "counting-qubit" and "angle-lq".
Model parse_model(std::string_view name);

inline bool is_qubit_model(Model m) { return m != Model::AngleLQ; }

using ModelState = std::variant<BlochVector, AngleState>;

/// Cost of ending in `s`: 1 - Pz for the qubit models, theta^2 of the
/// wrapped representative for the angle model.
double terminal_cost(Model model, const ModelState& s);

} // namespace qfc
