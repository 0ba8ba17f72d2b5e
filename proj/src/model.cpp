#include "qfc/model.hpp"

#include <cmath>
#include <stdexcept>

namespace qfc {

std::string_view model_name(Model m)
{
    switch (m) {
    case Model::DiffusiveQubit:
        return "diffusive-qubit";
    case Model::CountingQubit:
        return "counting-qubit";
    case Model::AngleLQ:
        return "angle-lq";
    }
    return "unknown";
}

Model parse_model(std::string_view name)
{
    if (name == "diffusive-qubit") {
        return Model::DiffusiveQubit;
    }
    if (name == "counting-qubit") {
        return Model::CountingQubit;
    }
    if (name == "angle-lq") {
        return Model::AngleLQ;
    }
    throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

double terminal_cost(Model model, const ModelState& s)
{
    if (model == Model::AngleLQ) {
        const double th = wrap_angle(std::get<AngleState>(s).theta);
        return th * th;
    }
    return 1.0 - std::get<BlochVector>(s).z;
}

} // namespace qfc
