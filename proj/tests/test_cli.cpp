#include "vfm/cli.hpp"
#include "vfm/datamodel.hpp"
#include "vfm/textio.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using vfm::dispatch;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("vfm_cli_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int rc = dispatch(args, o, e);
    if (out) *out = o.str() + e.str();
    return rc;
}

std::size_t line_count(const std::string& path) {
    const std::string s = vfm::read_file(path);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 1") {
    std::string msg;
    CHECK(run({"no-such-command"}, &msg) == 1);
    CHECK(msg.find("Usage") != std::string::npos);
    CHECK(run({}) == 1);
    CHECK(run({"train"}) == 1);
    CHECK(run({"--help"}) == 0);
    CHECK(run({"ablate", "--experiment", "3"}) == 1);
}

TEST_CASE("gen-data, train, eval, integrity, optimize, sensitivity and report") {
    TempDir tmp;
    const std::string d = tmp / "data";
    REQUIRE(run({"gen-data", "--wells", "80", "--steps", "64", "--seed", "42", "--out-dir", d}) == 0);
    CHECK(line_count(d + "/portfolio.csv") == 80 * 64 + 1);
    CHECK(fs::exists(d + "/bounds.txt"));
    CHECK(vfm::read_file(d + "/manifest_gen-data.json").find("\"config_hash\"") != std::string::npos);

    // a second generation with the same seed reproduces the artifact byte for byte
    const std::string d2 = tmp / "data2";
    REQUIRE(run({"gen-data", "--wells", "80", "--steps", "64", "--seed", "42", "--out-dir", d2}) == 0);
    CHECK(vfm::read_file(d + "/portfolio.csv") == vfm::read_file(d2 + "/portfolio.csv"));

    const std::string cfg = tmp / "small.cfg";
    vfm::write_file(cfg, "# quick settings\nembed_dim=16\nhead_hidden=8\nn_tcn_blocks=2\npatience=1\n");
    const std::string ck = tmp / "film.ckpt";
    const std::string data = d + "/portfolio.csv";
    const std::string t = tmp / "train";
    std::string out;
    REQUIRE(run({"--config", cfg, "train", "--data", data, "--epochs", "2", "--out", ck, "--out-dir", t}, &out) == 0);
    CHECK(out.find("epoch=0 train_total=") != std::string::npos);
    CHECK(fs::exists(ck));
    CHECK(run({"--config", cfg, "train", "--variant", "no_config", "--data", data, "--epochs", "2", "--out", ck,
               "--out-dir", t}) == 1);
    CHECK(run({"--config", cfg, "train", "--variant", "no_config", "--data", data, "--epochs", "2", "--out", ck,
               "--out-dir", t, "--force"}) == 0);
    REQUIRE(run({"--config", cfg, "train", "--data", data, "--epochs", "2", "--out", ck, "--out-dir", t, "--force"}) == 0);

    const std::string e = tmp / "eval";
    REQUIRE(run({"eval", "--checkpoint", ck, "--data", data, "--split", "test", "--out-dir", e}) == 0);
    CHECK(line_count(e + "/metrics.csv") == 2);
    CHECK(line_count(e + "/scatter.csv") == 8 * 64 * 6 + 1);

    const std::string i = tmp / "integrity";
    REQUIRE(run({"integrity", "--checkpoint", ck, "--data", data, "--out-dir", i}) == 0);
    CHECK(line_count(i + "/integrity.csv") == 9);

    const std::string ocfg = tmp / "opt.cfg";
    vfm::write_file(ocfg, "presample=10\npop_size=6\nn_weights=3\n");
    const std::string o = tmp / "opt";
    REQUIRE(run({"--config", ocfg, "optimize", "--checkpoint", ck, "--data", data, "--generations", "2", "--out-dir", o}) == 0);
    CHECK(vfm::read_file(o + "/front.csv").rfind("w_oil,w_slug,", 0) == 0);
    CHECK(line_count(o + "/baselines.csv") == 3);
    CHECK(run({"--config", ocfg, "optimize", "--checkpoint", ck, "--data", data, "--scenarios", "W0000,W0001",
               "--objectives", "3", "--generations", "1", "--out-dir", o}) == 0);
    CHECK(run({"optimize", "--checkpoint", ck, "--data", data, "--scenarios", "NOPE", "--out-dir", o}) == 1);

    const std::string s = tmp / "sens";
    REQUIRE(run({"sensitivity", "--checkpoint", ck, "--data", data, "--field", "K_C", "--n-points", "5", "--out-dir", s}) == 0);
    CHECK(line_count(s + "/sensitivity_K_C.csv") == 6);
    CHECK(run({"sensitivity", "--checkpoint", ck, "--data", data, "--field", "BOGUS", "--out-dir", s}) == 1);

    CHECK(run({"eval", "--checkpoint", tmp / "missing.ckpt", "--data", data, "--out-dir", e}) == 2);
}

TEST_CASE("ablate writes one row per architecture and report summarises it") {
    TempDir tmp;
    const std::string cfg = tmp / "small.cfg";
    vfm::write_file(cfg, "embed_dim=16\nhead_hidden=8\nn_tcn_blocks=2\npatience=1\n");
    const std::string a = tmp / "abl";
    REQUIRE(run({"--config", cfg, "ablate", "--experiment", "1", "--wells", "20", "--steps", "16", "--epochs", "2",
                 "--out-dir", a}) == 0);
    CHECK(line_count(a + "/ablation_exp1.csv") == 4);
    std::string out;
    REQUIRE(run({"report", "--out-dir", a}, &out) == 0);
    CHECK(out.find("FiLM") != std::string::npos);
    CHECK(fs::exists(a + "/report.md"));
}

}
