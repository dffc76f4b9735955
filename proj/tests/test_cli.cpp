#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "swg/scene.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = SWG_CLI_PATH;

int run(const std::string& args) {
    int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("swg_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

// Per-frame active-event counts from an annotation CSV.
size_t max_concurrency(const fs::path& csv) {
    auto anns = swg::read_annotations(csv.string());
    std::map<size_t, size_t> per_frame;
    for (const auto& a : anns) ++per_frame[a.frame_idx];
    size_t worst = 0;
    for (const auto& [f, n] : per_frame) worst = std::max(worst, n);
    return worst;
}

}  // namespace

TEST_CASE("synth with zero scenes leaves only a manifest") {
    TempDir td("synth0");
    REQUIRE(run("synth --scenes 0 --classes 4 --out " + td.sub("scenes") + " --seed 1") == 0);
    size_t files = 0;
    bool manifest = false;
    for (const auto& e : fs::directory_iterator(td.sub("scenes"))) {
        ++files;
        if (e.path().filename() == "manifest.json") manifest = true;
    }
    CHECK(files == 1);
    CHECK(manifest);
}

TEST_CASE("synth is byte-identical per seed and respects max-overlap") {
    TempDir td("synthdet");
    std::string a = td.sub("a"), b = td.sub("b");
    REQUIRE(run("synth --scenes 3 --classes 4 --max-overlap 2 --out " + a + " --seed 9") == 0);
    REQUIRE(run("synth --scenes 3 --classes 4 --max-overlap 2 --out " + b + " --seed 9") == 0);
    for (int i = 0; i < 3; ++i) {
        std::string name = "scene_000" + std::to_string(i) + ".wav";
        CHECK(slurp(fs::path(a) / name) == slurp(fs::path(b) / name));
        CHECK(max_concurrency(fs::path(a) / ("scene_000" + std::to_string(i) + ".csv")) <= 2);
    }
    // different seed differs
    std::string c = td.sub("c");
    REQUIRE(run("synth --scenes 1 --classes 4 --out " + c + " --seed 10") == 0);
    CHECK(slurp(fs::path(a) / "scene_0000.wav") != slurp(fs::path(c) / "scene_0000.wav"));
}

TEST_CASE("usage errors exit 1, data errors exit 2") {
    CHECK(run("synth --no-such-flag 1") == 1);
    CHECK(run("definitely-not-a-command") == 1);
    CHECK(run("extract --in /nonexistent_dir_xyz --out /tmp/unused_out") == 2);
    CHECK(run("eval --ref /nonexistent.csv --pred /nonexistent.csv") == 2);
}

TEST_CASE("eval of a file against itself is a perfect report") {
    TempDir td("evalself");
    std::vector<swg::EventAnnotation> anns{{0, 1, 0, 30.0, 10.0}, {3, 0, 0, -45.0, 0.0}};
    swg::write_annotations(td.sub("ref.csv"), anns);
    REQUIRE(run("eval --ref " + td.sub("ref.csv") + " --pred " + td.sub("ref.csv") +
                " --classes 2 --out " + td.sub("report.csv")) == 0);
    std::string report = slurp(td.sub("report.csv"));
    CHECK(report.find("ER,0\n") != std::string::npos);
    CHECK(report.find("F20,1\n") != std::string::npos);
    CHECK(report.find("LE_deg,0\n") != std::string::npos);
    CHECK(report.find("SELD,0\n") != std::string::npos);
}

TEST_CASE("plot draws constant reference lines for a static source") {
    TempDir td("plot");
    // class 0 fixed at azimuth 0, elevation 0 -> accdoa (1, 0, 0)
    std::vector<swg::EventAnnotation> anns;
    for (size_t f = 0; f < 10; ++f) anns.push_back({f, 0, 0, 0.0, 0.0});
    swg::write_annotations(td.sub("ref.csv"), anns);
    REQUIRE(run("plot --ref " + td.sub("ref.csv") + " --classes 2 --frames 10 --out " +
                td.sub("plots")) == 0);
    std::string svg = slurp(fs::path(td.sub("plots")) / "class_0.svg");
    REQUIRE(svg.find("<polyline") != std::string::npos);
    // scaling maps value v to y = 120 - 90*v: x-axis (v=1) -> 30, y/z (v=0) -> 120
    CHECK(svg.find("stroke=\"red\"") != std::string::npos);
    size_t red = svg.find("stroke=\"red\"");
    size_t pts = svg.find("points=\"", red);
    size_t end = svg.find('"', pts + 8);
    std::string points = svg.substr(pts + 8, end - pts - 8);
    std::istringstream ss(points);
    std::string pair;
    while (ss >> pair) {
        double y = std::stod(pair.substr(pair.find(',') + 1));
        CHECK(y == doctest::Approx(30.0));  // constant line at encode() value 1
    }
    CHECK(fs::exists(fs::path(td.sub("plots")) / "class_1.svg"));
}

TEST_CASE("gradcheck subcommand passes") {
    CHECK(run("gradcheck") == 0);
}

TEST_CASE("synth -> extract -> train -> infer -> eval mini pipeline") {
    TempDir td("pipeline");
    // 1-second clips: 50 feature frames, 10 label frames
    REQUIRE(run("synth --scenes 4 --classes 4 --max-events 1 --duration 1.0 --out " +
                td.sub("scenes") + " --seed 5") == 0);
    REQUIRE(run("extract --in " + td.sub("scenes") + " --out " + td.sub("feats")) == 0);
    CHECK(fs::exists(fs::path(td.sub("feats")) / "scene_0003.swgt"));

    std::ofstream cfg(td.sub("model.cfg"));
    cfg << "preset=desk\ninput_frames=50\nlabel_frames_per_clip=10\n";
    cfg.close();
    REQUIRE(run("train --features " + td.sub("feats") + " --config " + td.sub("model.cfg") +
                " --out " + td.sub("ckpt.swgk") + " --log " + td.sub("log.csv") +
                " --steps 3 --batch 2 --seed 2") == 0);
    CHECK(fs::exists(td.sub("ckpt.swgk")));
    std::string log = slurp(td.sub("log.csv"));
    CHECK(log.rfind("epoch,train_loss,ER,F20,LE,LR,SELD", 0) == 0);

    REQUIRE(run("infer --checkpoint " + td.sub("ckpt.swgk") + " --features " + td.sub("feats") +
                " --out " + td.sub("preds")) == 0);
    CHECK(fs::exists(fs::path(td.sub("preds")) / "scene_0000.pred.csv"));
    CHECK(fs::exists(fs::path(td.sub("preds")) / "scene_0000.accdoa.swgt"));

    // inference is idempotent
    REQUIRE(run("infer --checkpoint " + td.sub("ckpt.swgk") + " --features " + td.sub("feats") +
                " --out " + td.sub("preds2")) == 0);
    CHECK(slurp(fs::path(td.sub("preds")) / "scene_0000.pred.csv") ==
          slurp(fs::path(td.sub("preds2")) / "scene_0000.pred.csv"));

    REQUIRE(run("eval --ref " + td.sub("scenes") + "/scene_0000.csv --pred " + td.sub("preds") +
                "/scene_0000.pred.csv --classes 4 --out " + td.sub("report.csv")) == 0);
    std::string report = slurp(td.sub("report.csv"));
    CHECK(report.find("SELD,") != std::string::npos);

    // config with an unknown key is rejected as a data error
    std::ofstream bad(td.sub("bad.cfg"));
    bad << "preset=desk\nnot_a_real_key=3\n";
    bad.close();
    CHECK(run("train --features " + td.sub("feats") + " --config " + td.sub("bad.cfg") +
              " --out " + td.sub("x.swgk") + " --steps 1") == 2);
}
