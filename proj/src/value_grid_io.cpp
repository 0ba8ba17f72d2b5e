#include "qfc/value_grid_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

namespace qfc {

namespace {

constexpr const char* format_tag = "qfc-vgrid";
constexpr int format_version = 1;

void write_f64(std::ostream& os, std::span<const double> data)
{
    std::string buf(data.size() * 8, '\0');
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(data[i]);
        for (std::size_t b = 0; b < 8; ++b) {
            buf[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFU);
        }
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_f64(std::istream& is, std::span<double> out)
{
    std::string buf(out.size() * 8, '\0');
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
        throw FormatError("vgrid payload is shorter than the header declares");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i * 8 + b])) << (8 * b);
        }
        out[i] = std::bit_cast<double>(bits);
    }
}

template <typename T>
T field(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key)) {
        throw FormatError(std::string("vgrid header lacks '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("vgrid header field '") + key + "': " + e.what());
    }
}

} // namespace

void write_value_grid(std::ostream& os, const ValueGrid& vg)
{
    const GridSpec& s = vg.spec();
    const ModelParams& p = vg.params();
    nlohmann::json h;
    h["format"] = format_tag;
    h["version"] = format_version;
    h["model"] = std::string(model_name(s.model));
    h["lower"] = s.lower;
    h["upper"] = s.upper;
    h["nodes"] = s.nodes;
    h["delta"] = s.delta;
    h["steps"] = s.steps;
    h["kappa_s_sq"] = p.kappa_s_sq();
    h["kappa_f_sq"] = p.kappa_f_sq();
    h["alpha"] = p.alpha();
    h["horizon"] = p.horizon();
    h["mode"] = std::string(control_mode_name(s.mode));
    h["u_max"] = s.u_max;
    h["control_nodes"] = s.control_nodes;
    h["slices"] = vg.slices();
    h["node_count"] = vg.nodes();
    h["control_components"] = vg.control_components();
    h["layout"] = "values[slice][node], controls[slice][node][component]; f64 little-endian";
    os << h.dump() << '\n';
    write_f64(os, vg.raw_values());
    write_f64(os, vg.raw_controls());
    if (!os) {
        throw std::runtime_error("failed writing vgrid data");
    }
}

ValueGrid read_value_grid(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) {
        throw FormatError("empty vgrid stream");
    }
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("vgrid header is not valid JSON: ") + e.what());
    }
    if (!h.is_object() || h.value("format", "") != format_tag) {
        throw FormatError("not a vgrid file");
    }
    if (field<int>(h, "version") != format_version) {
        throw FormatError("unsupported vgrid version");
    }

    GridSpec spec;
    try {
        spec.model = parse_model(field<std::string>(h, "model"));
        spec.mode = parse_control_mode(field<std::string>(h, "mode"));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("vgrid header: ") + e.what());
    }
    spec.lower = field<std::array<double, 3>>(h, "lower");
    spec.upper = field<std::array<double, 3>>(h, "upper");
    spec.nodes = field<std::array<std::size_t, 3>>(h, "nodes");
    spec.delta = field<double>(h, "delta");
    spec.steps = field<std::size_t>(h, "steps");
    spec.u_max = field<double>(h, "u_max");
    spec.control_nodes = field<std::size_t>(h, "control_nodes");

    std::optional<ValueGrid> vg;
    try {
        const ModelParams params(field<double>(h, "kappa_s_sq"), field<double>(h, "kappa_f_sq"),
                                 field<double>(h, "alpha"), field<double>(h, "horizon"));
        spec.validate(params);
        vg.emplace(spec, params);
    } catch (const FormatError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("vgrid header: ") + e.what());
    }
    if (field<std::size_t>(h, "slices") != vg->slices() || field<std::size_t>(h, "node_count") != vg->nodes() ||
        field<std::size_t>(h, "control_components") != vg->control_components()) {
        throw FormatError("vgrid header sizes disagree with its grid description");
    }
    read_f64(is, vg->raw_values());
    read_f64(is, vg->raw_controls());
    if (is.peek() != std::char_traits<char>::eof()) {
        throw FormatError("vgrid payload is longer than the header declares");
    }
    return std::move(*vg);
}

void save_value_grid(const ValueGrid& vg, const std::filesystem::path& path)
{
    write_file_atomic(path, [&](std::ostream& os) { write_value_grid(os, vg); });
}

ValueGrid load_value_grid(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return read_value_grid(in);
}

void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw std::runtime_error("cannot open " + tmp.string() + " for writing");
            }
            fill(out);
            out.flush();
            if (!out) {
                throw std::runtime_error("failed writing " + tmp.string());
            }
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

} // namespace qfc
