#include "uwoc/pipeline.hpp"

#include "uwoc/errors.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace uwoc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("uwoc_test_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(UWOC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

GenerationConfig small_config(const fs::path& dir, double scale = 0.01) {
    GenerationConfig g;
    g.output_dir = dir;
    g.resolution = 16;
    g.seed = 21;
    g.scale = scale;
    g.symbols = 200;
    return g;
}

} // namespace

TEST_CASE("replicates and label grid") {
    CHECK(replicates_for_scale(1.0) == 30);
    CHECK(replicates_for_scale(0.1) == 3);
    CHECK(replicates_for_scale(0.25) == 8);
    CHECK(replicates_for_scale(0.001) == 1);
    CHECK_THROWS_AS(replicates_for_scale(0.0), std::invalid_argument);
    CHECK_THROWS_AS(replicates_for_scale(1.5), std::invalid_argument);
    CHECK(LabelGrid::osnr_db(0) == 15);
    CHECK(LabelGrid::osnr_db(15) == 30);
    CHECK(LabelGrid::phase_index(45) == 4);
    CHECK_THROWS_AS(LabelGrid::osnr_index(31), std::invalid_argument);
    CHECK_THROWS_AS(LabelGrid::phase_index(15), std::invalid_argument);
}

TEST_CASE("child seeds differ across the label tuple and are stable") {
    CHECK(child_seed(1, 0, 15, 0, 0) == child_seed(1, 0, 15, 0, 0));
    CHECK(child_seed(1, 0, 15, 0, 0) != child_seed(1, 0, 15, 0, 1));
    CHECK(child_seed(1, 0, 15, 0, 0) != child_seed(1, 1, 15, 0, 0));
    CHECK(child_seed(1, 0, 15, 0, 0) != child_seed(2, 0, 15, 0, 0));
}

TEST_CASE("scale 0.1 yields 960 records in full label proportions") {
    const auto dir = scratch("scale");
    auto g = small_config(dir, 0.1);
    g.symbols = 50;
    const auto m = gen_dataset(g);
    CHECK(m.records.size() == 960);
    const auto counts = m.counts();
    CHECK(counts.size() == 4 * 16 * 5);
    for (const auto& [key, n] : counts) CHECK(n == 3);
    const auto back = read_manifest(dir / "manifest.csv");
    CHECK(back.records.size() == 960);
    CHECK(back.resolution() == 16);
    validate_images(back);
}

TEST_CASE("generation is deterministic and independent of worker count") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    auto ga = small_config(a);
    auto gb = small_config(b);
    gb.workers = 3;
    const auto ma = gen_dataset(ga);
    gen_dataset(gb);
    for (const auto& r : ma.records) CHECK(slurp(a / r.path) == slurp(b / r.path));
    CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
}

TEST_CASE("physical mode produces a valid dataset") {
    const auto dir = scratch("phys");
    auto g = small_config(dir);
    g.mode = ChannelMode::Physical;
    const auto m = gen_dataset(g);
    CHECK(m.records.size() == 320);
    CHECK(m.config.at("mode") == "physical");
    validate_images(read_manifest(dir / "manifest.csv"));
}

TEST_CASE("stratified split keeps round(0.8 n) per label triple") {
    const auto dir = scratch("split");
    auto g = small_config(dir, 0.1);
    g.symbols = 20;
    const auto m = gen_dataset(g);
    const auto s = stratified_split(m, 0.8, 4);
    CHECK(s.train.size() + s.test.size() == m.records.size());
    std::map<std::array<int, 3>, int> train_counts;
    for (auto i : s.train) {
        const auto& r = m.records[i];
        ++train_counts[{r.format, static_cast<int>(r.osnr_db), static_cast<int>(r.phase_std_deg)}];
    }
    for (const auto& [key, n] : m.counts()) CHECK(train_counts[key] == static_cast<int>(std::lround(n * 0.8)));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    const auto again = stratified_split(m, 0.8, 4);
    CHECK(again.train == s.train);
}

TEST_CASE("manifest validation rejects broken records") {
    const auto dir = scratch("validate");
    const auto m = gen_dataset(small_config(dir));
    const std::string good = slurp(dir / "manifest.csv");

    auto write_variant = [&](const std::string& from, const std::string& to) {
        std::string s = good;
        const auto pos = s.find(from);
        REQUIRE(pos != std::string::npos);
        s.replace(pos, from.size(), to);
        std::ofstream(dir / "bad.csv") << s;
        return dir / "bad.csv";
    };
    const auto& r0 = m.records[0];
    std::ostringstream line;
    line << r0.path << ",0,15,";
    CHECK_THROWS_AS(read_manifest(write_variant(line.str(), r0.path + ",0,31,")), ParseError);
    CHECK_THROWS_AS(read_manifest(write_variant(line.str(), r0.path + ",7,15,")), ParseError);
    CHECK_THROWS_AS(read_manifest(write_variant(manifest_header, "a,b,c")), ParseError);
    CHECK_THROWS_AS(read_manifest(dir / "missing.csv"), IoError);

    std::ofstream(dir / r0.path, std::ios::binary) << "garbage";
    CHECK_THROWS_AS(validate_images(read_manifest(dir / "manifest.csv")), ParseError);
}

TEST_CASE("train, eval, cluster and infer end to end") {
    const auto dir = scratch("e2e");
    const auto data = dir / "data";
    auto g = small_config(data, 0.1);
    g.symbols = 300;
    const auto m = gen_dataset(g);

    TrainCommandConfig t;
    t.manifest = data / "manifest.csv";
    t.output_dir = dir / "run";
    t.epochs = 4;
    t.eval_every = 2;
    t.seed = 3;
    const auto r = train_cmd(t);
    CHECK(r.curve.size() == 2);
    const auto curves = read_curves(r.curves);
    REQUIRE(curves.size() == 2);
    CHECK(curves[1].epoch == 4);
    CHECK(curves[1].osnr_accuracy == r.curve[1].osnr_accuracy);

    std::ostringstream report;
    const auto ev = eval_cmd(r.weights, r.heldout_manifest, report);
    const auto held = read_manifest(r.heldout_manifest);
    CHECK(held.records.size() == 320);   // 3 per cell, round(2.4) = 2 train
    CHECK(ev.evaluation.osnr.total() == static_cast<long>(held.records.size()));
    long by_phase = 0, errs = 0;
    for (int p = 0; p < 5; ++p) {
        by_phase += ev.breakdown.samples_by_phase[static_cast<std::size_t>(p)];
        errs += ev.breakdown.osnr_errors_by_phase[static_cast<std::size_t>(p)];
    }
    CHECK(by_phase == static_cast<long>(held.records.size()));
    long osnr_errors = 0;
    for (int i = 0; i < 16; ++i) osnr_errors += ev.evaluation.osnr.row_sum(i) - ev.evaluation.osnr.at(i, i);
    CHECK(errs == osnr_errors);
    CHECK(report.str().find("osnr") != std::string::npos);

    ClusterCommandConfig c;
    c.weights = r.weights;
    c.manifest = r.heldout_manifest;
    c.report = dir / "mnsm.txt";
    c.kmeans.k = 4;
    const auto cr = cluster_cmd(c);
    CHECK(cr.model.centers.size() == 4);
    CHECK(cr.model.assignments.size() == held.records.size());
    for (auto a : cr.model.assignments) CHECK(a < 4);
    std::ifstream rep(c.report);
    int centers = 0, points = 0;
    for (std::string line; std::getline(rep, line);) {
        centers += line.rfind("center ", 0) == 0;
        points += line.rfind("point ", 0) == 0;
    }
    CHECK(centers == 4);
    CHECK(points == static_cast<int>(held.records.size()));

    const auto image = held.image_path(held.records[0]);
    const auto i1 = infer_cmd(r.weights, c.report, image);
    const auto i2 = infer_cmd(r.weights, c.report, image);
    CHECK(i1.osnr_db >= 15);
    CHECK(i1.osnr_db <= 30);
    CHECK(LabelGrid::phase_index(i1.phase_deg) >= 0);
    CHECK(i1.level < 4);
    CHECK(i1.osnr_db == i2.osnr_db);
    CHECK(i1.format.index() == i2.format.index());
    CHECK(i1.distance == i2.distance);

    // 64 px image against 16 px weights
    const auto big = scratch("e2e_big");
    auto g64 = small_config(big);
    g64.resolution = 64;
    const auto m64 = gen_dataset(g64);
    CHECK_THROWS_AS(infer_cmd(r.weights, c.report, m64.image_path(m64.records[0])), std::invalid_argument);
    std::ostringstream sink;
    CHECK_THROWS_AS(eval_cmd(r.weights, big / "manifest.csv", sink), std::invalid_argument);
}

TEST_CASE("ground-truth clustering of the label grid") {
    mnsm::KMeansOptions o;
    o.seed = 1;
    const auto model = cluster_label_grid(o);
    CHECK(model.centers.size() == 8);
    CHECK(classify_quality(30, 0, model).level != classify_quality(15, 45, model).level);
}

TEST_CASE("CLI exit codes") {
    const auto dir = scratch("cli");
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("gen-dataset --out " + (dir / "x").string()) == 1);                 // missing --seed
    CHECK(run_cli("train --manifest m.csv --out o") == 1);                              // missing --seed
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("train --manifest " + (dir / "none.csv").string() + " --out " + (dir / "r").string() +
                  " --seed 1") == 2);
    CHECK(run_cli("gen-dataset --out " + (dir / "y").string() + " --seed 1 --resolution 20") == 3);
    CHECK(run_cli("gen-dataset --out " + (dir / "z").string() + " --seed 1 --scale 0.01 --resolution 16 --symbols 20") ==
          0);
    CHECK(fs::exists(dir / "z" / "manifest.csv"));
    std::ofstream(dir / "bad.csv") << "not,a,manifest\n";
    CHECK(run_cli("train --manifest " + (dir / "bad.csv").string() + " --out " + (dir / "r").string() + " --seed 1") ==
          3);
}
