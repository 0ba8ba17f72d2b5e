#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "qfc/value_grid_io.hpp"

using namespace qfc;
namespace fs = std::filesystem;

namespace {

ValueGrid random_grid(Model model, std::uint64_t seed)
{
    const ModelParams params(0.3, 0.7, 0.25, 0.5);
    GridSpec spec = model == Model::AngleLQ ? GridSpec::angle(17, 0.1, 5) : GridSpec::qubit(model, 5, 0.1, 5);
    spec.mode = ControlMode::Exhaustive;
    spec.u_max = 3.5;
    spec.control_nodes = 9;
    ValueGrid vg(spec, params);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    for (double& v : vg.raw_values()) {
        v = n(rng);
    }
    for (double& v : vg.raw_controls()) {
        v = n(rng);
    }
    vg.raw_values()[1] = -0.0;
    vg.raw_values()[2] = 5e-324;
    return vg;
}

std::string serialize(const ValueGrid& vg)
{
    std::ostringstream os(std::ios::binary);
    write_value_grid(os, vg);
    return os.str();
}

ValueGrid parse(const std::string& bytes)
{
    std::istringstream is(bytes, std::ios::binary);
    return read_value_grid(is);
}

fs::path scratch_dir()
{
    const fs::path dir = fs::temp_directory_path() / ("qfc_io_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("value_grid_io")
{
    TEST_CASE("round trip is bit exact")
    {
        for (Model m : {Model::AngleLQ, Model::DiffusiveQubit, Model::CountingQubit}) {
            const ValueGrid vg = random_grid(m, 7);
            const ValueGrid back = parse(serialize(vg));
            CHECK(back.spec().model == m);
            CHECK(back.spec().nodes == vg.spec().nodes);
            CHECK(back.spec().lower == vg.spec().lower);
            CHECK(back.spec().delta == vg.spec().delta);
            CHECK(back.spec().steps == 5);
            CHECK(back.spec().mode == ControlMode::Exhaustive);
            CHECK(back.spec().u_max == 3.5);
            CHECK(back.spec().control_nodes == 9);
            CHECK(back.params().kappa_s_sq() == 0.3);
            CHECK(back.params().kappa_f_sq() == 0.7);
            CHECK(back.params().alpha() == 0.25);
            CHECK(back.params().horizon() == 0.5);
            REQUIRE(back.raw_values().size() == vg.raw_values().size());
            REQUIRE(back.raw_controls().size() == vg.raw_controls().size());
            CHECK(std::memcmp(back.raw_values().data(), vg.raw_values().data(), vg.raw_values().size() * 8) == 0);
            CHECK(std::memcmp(back.raw_controls().data(), vg.raw_controls().data(), vg.raw_controls().size() * 8) == 0);
            CHECK(serialize(back) == serialize(vg));
        }
    }

    TEST_CASE("payload is little-endian float64 after one header line")
    {
        const ValueGrid vg = random_grid(Model::AngleLQ, 8);
        const std::string bytes = serialize(vg);
        const auto nl = bytes.find('\n');
        REQUIRE(nl != std::string::npos);
        CHECK(bytes.size() - nl - 1 == 8 * (vg.raw_values().size() + vg.raw_controls().size()));
        // -0.0 is the second value: only the sign bit in the last byte
        const std::string second = bytes.substr(nl + 1 + 8, 8);
        CHECK(second == std::string("\0\0\0\0\0\0\0\x80", 8));
    }

    TEST_CASE("malformed content is rejected")
    {
        const std::string good = serialize(random_grid(Model::DiffusiveQubit, 9));
        CHECK_THROWS_AS(parse(good.substr(0, good.size() - 1)), FormatError);
        CHECK_THROWS_AS(parse(good + "x"), FormatError);
        CHECK_THROWS_AS(parse(""), FormatError);
        CHECK_THROWS_AS(parse("{not json\n"), FormatError);
        CHECK_THROWS_AS(parse("{\"format\":\"other\"}\n"), FormatError);

        const auto nl = good.find('\n');
        const std::string header = good.substr(0, nl);
        const std::string payload = good.substr(nl);
        auto edit = [&](const std::string& from, const std::string& to) {
            std::string h = header;
            const auto at = h.find(from);
            REQUIRE(at != std::string::npos);
            h.replace(at, from.size(), to);
            return h + payload;
        };
        CHECK_THROWS_AS(parse(edit("\"version\":1", "\"version\":2")), FormatError);
        CHECK_THROWS_AS(parse(edit("\"steps\":5", "\"steps\":6")), FormatError);
        CHECK_THROWS_AS(parse(edit("\"model\":\"diffusive-qubit\"", "\"model\":\"angle-lq\"")), FormatError);
        CHECK_THROWS_AS(parse(edit("\"model\":\"diffusive-qubit\"", "\"model\":\"qutrit\"")), FormatError);
        CHECK_THROWS_AS(parse(edit("\"nodes\":[5,5,5]", "\"nodes\":[5,5,6]")), FormatError);
        CHECK_THROWS_AS(parse(edit("\"slices\":6", "\"slices\":\"six\"")), FormatError);
        CHECK_THROWS_AS(parse(edit("\"alpha\":0.25,", "")), FormatError);
    }

    TEST_CASE("files are written atomically")
    {
        const fs::path dir = scratch_dir();
        const fs::path path = dir / "g.vgrid";
        const ValueGrid vg = random_grid(Model::CountingQubit, 10);
        save_value_grid(vg, path);
        CHECK(fs::exists(path));
        CHECK_FALSE(fs::exists(dir / "g.vgrid.tmp"));
        CHECK(serialize(load_value_grid(path)) == serialize(vg));

        // a failing writer leaves the previous file untouched and no temporary behind
        CHECK_THROWS_AS(write_file_atomic(path, [](std::ostream& os) {
                            os << "partial";
                            throw std::runtime_error("disk full");
                        }),
                        std::runtime_error);
        CHECK_FALSE(fs::exists(dir / "g.vgrid.tmp"));
        CHECK(serialize(load_value_grid(path)) == serialize(vg));

        CHECK_THROWS(load_value_grid(dir / "missing.vgrid"));
        fs::remove_all(dir);
    }
}
