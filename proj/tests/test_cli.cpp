#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oxy/config.hpp"
#include "oxy/oximetry.hpp"
#include "support.hpp"

#include "json.hpp"

using namespace oxy;
namespace fs = std::filesystem;

namespace {

// runs the binary with output captured to a file; returns the exit status
int oxy_run(const test::TempDir& dir, const std::string& args, std::string* out = nullptr) {
    const fs::path log = dir / "stdout.txt";
    const std::string cmd = std::string("\"") + OXY_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (out) {
        std::ifstream in(log);
        std::ostringstream ss;
        ss << in.rdbuf();
        *out = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    return nlohmann::json::parse(in);
}

const char* kSmall = R"([phantom]
width = 64
height = 64
[bundle]
n_spot = 121
r = 1.5
d = 5
[augment]
window = 32
stride = 16
out_size = 32
[generator]
rgb_stem_channels = 8
shsi_stem_channels = 8
fusion_channels = 16
trunk_blocks = 1
branch_blocks = 1
[discriminator]
channels = [8, 16, 16, 16]
)";

}  // namespace

TEST_CASE("init-config prints a config that parses back to the defaults") {
    test::TempDir dir;
    std::string out;
    REQUIRE(oxy_run(dir, "init-config", &out) == 0);
    CHECK(parse_config(out).hash() == ExperimentConfig{}.hash());
    CHECK(oxy_run(dir, "--version", &out) == 0);
    CHECK(out.find("0.1.0") != std::string::npos);
}

TEST_CASE("bad usage exits nonzero with a message") {
    test::TempDir dir;
    std::string out;
    CHECK(oxy_run(dir, "", &out) != 0);
    CHECK(oxy_run(dir, "no-such-command", &out) != 0);
    CHECK(oxy_run(dir, "--out \"" + dir.path.string() + "\" mask --n-spot 200", &out) != 0);
    CHECK(out.find("200") != std::string::npos);
    {
        std::ofstream os(dir / "bad.toml");
        os << "[train]\nlr = \"fast\"\n";
    }
    CHECK(oxy_run(dir, "--config \"" + (dir / "bad.toml").string() + "\" mask", &out) != 0);
    CHECK(out.find("bad.toml:2") != std::string::npos);
}

TEST_CASE("phantom, mask and oracle commands agree with the library") {
    test::TempDir dir;
    {
        std::ofstream os(dir / "small.toml");
        os << kSmall;
    }
    const std::string base = "--config \"" + (dir / "small.toml").string() + "\" --out \"" + dir.path.string() + "\" --seed 5 ";
    REQUIRE(oxy_run(dir, base + "phantom --count 2") == 0);
    REQUIRE(fs::exists(dir / "phantom_001.cube"));
    const Hypercube cube = load_cube(dir / "phantom_000.cube");
    CHECK(cube.width == 64);
    CHECK(cube.height == 64);

    REQUIRE(oxy_run(dir, base + "mask --n-spot 121") == 0);
    std::ifstream csv(dir / "mask.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 1 + 121);

    REQUIRE(oxy_run(dir, base + "sto2-oracle --cube \"" + (dir / "phantom_000.cube").string() + "\"") == 0);
    const StO2Map cli = load_sto2_map(dir / "sto2.map");
    const StO2Map lib = estimate_sto2_map(cube, flat_white_reference(cube.grid), ChromophoreTable::builtin());
    CHECK(test::same_bits(cli.values, lib.values));
    CHECK(cli.mask.codes == lib.mask.codes);

    const auto prov = read_json(dir / "provenance_sto2-oracle.json");
    CHECK(prov["command"] == "sto2-oracle");
    CHECK(prov["seed"] == 5);
    CHECK(prov["version"] == "0.1.0");
    ExperimentConfig expected = load_config(dir / "small.toml");
    expected.set_seed(5);
    expected.output_dir = dir.path.string();
    CHECK(prov["config_hash"] == expected.hash());
    CHECK(prov["config"]["bundle"]["d"] == 5.0);
}

TEST_CASE("augment, train, infer and evaluate run end to end") {
    test::TempDir dir;
    {
        std::ofstream os(dir / "small.toml");
        os << kSmall;
    }
    const std::string base = "--config \"" + (dir / "small.toml").string() + "\" --out \"" + dir.path.string() + "\" ";
    std::string out;
    REQUIRE(oxy_run(dir, base + "augment --count 2 --test 1", &out) == 0);
    const auto manifest = read_json(dir / "manifest.json");
    CHECK(manifest["samples"].size() == 2 * 27);  // 3 x 3 windows, 3 variants

    REQUIRE(oxy_run(dir, base + "train --manifest \"" + (dir / "manifest.json").string() + "\" --steps 3", &out) == 0);
    REQUIRE(fs::exists(dir / "checkpoint_final.oxck"));
    std::ifstream loss(dir / "loss.csv");
    std::string line;
    std::getline(loss, line);
    CHECK(line == "step,loss_D,loss_G,l1_term,adv_term");
    std::size_t rows = 0;
    while (std::getline(loss, line)) ++rows;
    CHECK(rows == 3);

    REQUIRE(oxy_run(dir, base + "phantom --count 1") == 0);
    REQUIRE(oxy_run(dir, base + "infer --checkpoint \"" + (dir / "checkpoint_final.oxck").string() + "\" --cube \"" +
                             (dir / "phantom_000.cube").string() + "\"") == 0);
    const StO2Map pred = load_sto2_map(dir / "prediction.map");
    CHECK(pred.width == 64);
    CHECK(read_json(dir / "timing.json")["milliseconds"].get<double>() > 0.0);

    REQUIRE(oxy_run(dir, base + "evaluate --pred \"" + (dir / "prediction.map").string() + "\" --truth \"" +
                             (dir / "phantom_000_truth.map").string() + "\"") == 0);
    const auto eval = read_json(dir / "eval.json");
    const double e_bar = eval["aggregate"]["e_bar"]["mean"];
    CHECK(e_bar > 0.0);
    CHECK(e_bar < 1.0);
}

TEST_CASE("kernel gradient checks pass through the CLI") {
    test::TempDir dir;
    std::string out;
    CHECK(oxy_run(dir, "--out \"" + dir.path.string() + "\" gradcheck --kernels-only", &out) == 0);
    CHECK(out.find("FAIL") == std::string::npos);
    CHECK(out.find("residual_block [parallel]") != std::string::npos);
}
