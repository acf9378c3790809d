// End-to-end checks through the installed binary (path injected by CMake).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "drnet/io_util.hpp"
#include "drnet/metrics.hpp"
#include "drnet/pixelmap.hpp"

using namespace drnet;
namespace fs = std::filesystem;

namespace {

const char* kCli = DRNET_CLI_PATH;

fs::path work_root() {
    const auto dir = fs::temp_directory_path() / "drnet_cli_test";
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string toy_config() {
    const auto path = work_root() / "toy.cfg";
    fs::create_directories(work_root());
    write_text_file(path.string(),
                    "T=64\nclip_step=64\nn=8\nstem_width=4\nblock_widths=8\n"
                    "ae_width=6\nae_latent=10\nbatch=4\nepochs=2\nlr=0.005\n");
    return path.string();
}

double mae_from_metrics_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    const auto lines = split(trim(text), '\n');
    REQUIRE(lines.size() == 2);
    const auto fields = split(lines[1], ',');
    REQUIRE(fields.size() == 7);
    return parse_double(fields[3], "mae");
}

}  // namespace

TEST_CASE("synth then chrom baseline reaches sub-bpm error on clean data") {
    const auto root = work_root() / "e2e";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = toy_config();

    CHECK(run("synth --clips 10 --seed 7 --noise none --config " + cfg + " --out " +
              (root / "d").string()) == 0);
    CHECK(run("baseline --method chrom --data " + (root / "d").string() + " --config " + cfg +
              " --out " + (root / "r").string()) == 0);
    const double mae = mae_from_metrics_csv((root / "r" / "metrics.csv").string());
    CHECK(mae < 1.0);
    CHECK(fs::exists(root / "r" / "predictions.csv"));
    CHECK(fs::exists(root / "r" / "run.json"));
}

TEST_CASE("train for one epoch emits a one-row log and a checkpoint") {
    const auto root = work_root() / "train1";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = toy_config();

    REQUIRE(run("synth --clips 4 --seed 3 --noise none --config " + cfg + " --out " +
                (root / "d").string()) == 0);
    CHECK(run("train --data " + (root / "d").string() + " --config " + cfg +
              " --epochs 1 --checkpoint-dir " + (root / "ck").string() + " --out " +
              (root / "run").string()) == 0);
    const std::string log = read_text_file((root / "run" / "log.csv").string());
    const auto lines = split(trim(log), '\n');
    REQUIRE(lines.size() == 2);  // header + one epoch
    CHECK(lines[0] == "epoch,loss_total,loss_phy,loss_cyc");
    CHECK(fs::exists(root / "ck" / "epoch_001.drnw"));
    CHECK(fs::exists(root / "run" / "weights.drnw"));

    // weights evaluate
    CHECK(run("eval --data " + (root / "d").string() + " --config " + cfg + " --weights " +
              (root / "run" / "weights.drnw").string() + " --out " + (root / "ev").string()) == 0);
    CHECK(fs::exists(root / "ev" / "metrics.csv"));
}

TEST_CASE("missing manifest exits with code 2 and names the path") {
    const auto root = work_root() / "missing";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = toy_config();
    CHECK(run("baseline --method green --data " + (root / "nodata").string() + " --config " + cfg +
              " --out " + (root / "r").string()) == 2);
}

TEST_CASE("validation problems exit with code 1") {
    const auto root = work_root() / "validation";
    fs::remove_all(root);
    fs::create_directories(root);
    write_text_file((root / "bad.cfg").string(), "rho=2\n");
    CHECK(run("synth --clips 3 --config " + (root / "bad.cfg").string() + " --out " +
              (root / "d").string()) == 1);
    CHECK(run("synth --clips 3 --unknown-flag --out " + (root / "d").string()) == 1);
    CHECK(run("baseline --method ica --data x --out y") == 1);
}

TEST_CASE("same seed reproduces byte-identical outputs") {
    const auto root = work_root() / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = toy_config();
    REQUIRE(run("synth --clips 5 --seed 11 --config " + cfg + " --out " + (root / "a").string()) == 0);
    REQUIRE(run("synth --clips 5 --seed 11 --config " + cfg + " --out " + (root / "b").string()) == 0);
    CHECK(read_text_file((root / "a" / "manifest.csv").string()) ==
          read_text_file((root / "b" / "manifest.csv").string()));
    CHECK(read_text_file((root / "a" / "clips" / "clip_0002.pm.csv").string()) ==
          read_text_file((root / "b" / "clips" / "clip_0002.pm.csv").string()));

    REQUIRE(run("baseline --method pos --data " + (root / "a").string() + " --config " + cfg +
                " --out " + (root / "r1").string()) == 0);
    REQUIRE(run("baseline --method pos --data " + (root / "a").string() + " --config " + cfg +
                " --out " + (root / "r2").string()) == 0);
    CHECK(read_text_file((root / "r1" / "metrics.csv").string()) ==
          read_text_file((root / "r2" / "metrics.csv").string()));
    CHECK(read_text_file((root / "r1" / "run.json").string()) ==
          read_text_file((root / "r2" / "run.json").string()));
}

TEST_CASE("augment crops verbatim rows from the enlarged map") {
    const auto root = work_root() / "augment";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = toy_config();
    REQUIRE(run("synth --clips 2 --seed 5 --config " + cfg + " --out " + (root / "d").string()) == 0);

    // build STMaps from the generated traces, then always-crop
    REQUIRE(run("stmap --trace " + (root / "d" / "clips" / "clip_0000.pm.csv").string() +
                " --trace-enlarged " + (root / "d" / "clips" / "clip_0000.pme.csv").string() +
                " --config " + cfg + " --out " + (root / "m").string()) == 0);
    REQUIRE(run("augment --stmap " + (root / "m" / "stmap.csv").string() + " --enlarged " +
                (root / "m" / "stmap_e.csv").string() + " --rho 1 --seed 2 --config " + cfg +
                " --out " + (root / "c").string()) == 0);

    const STMap cropped = load_stmap_csv((root / "c" / "cropped.csv").string());
    const STMap me = load_stmap_csv((root / "m" / "stmap_e.csv").string());
    CHECK(cropped.rows == 8);
    // locate the band start
    int y = -1;
    for (int cand = 0; cand + cropped.rows <= me.rows; ++cand) {
        if (cropped.at(0, 0, 0) == me.at(0, cand, 0) && cropped.at(0, 0, 1) == me.at(0, cand, 1)) {
            y = cand;
            break;
        }
    }
    REQUIRE(y >= 0);
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < cropped.rows; ++r) {
            for (int t = 0; t < cropped.frames; ++t) {
                CHECK(cropped.at(c, r, t) == me.at(c, y + r, t));
            }
        }
    }
}

TEST_CASE("psd output is a parseable two-column csv") {
    const auto root = work_root() / "psd";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = toy_config();
    REQUIRE(run("synth --clips 2 --seed 9 --config " + cfg + " --out " + (root / "d").string()) == 0);
    REQUIRE(run("psd --bvp " + (root / "d" / "clips" / "clip_0000.bvp.csv").string() +
                " --config " + cfg + " --out " + (root / "p").string()) == 0);
    const auto lines = split(trim(read_text_file((root / "p" / "psd.csv").string())), '\n');
    REQUIRE(lines.size() == 2 + 1024);  // header + nfft/2+1 bins
    CHECK(lines[0] == "freq_hz,power");
    const auto first = split(lines[1], ',');
    CHECK(parse_double(first[0], "freq") == 0.0);
}
