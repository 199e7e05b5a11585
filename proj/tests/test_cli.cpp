#include <cstdio>
#include <limits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "muce/config.hpp"
#include "muce/csv.hpp"
#include "muce/errors.hpp"
#include "muce/experiment.hpp"
#include "muce/io.hpp"
#include "muce/manifest.hpp"
#include "muce/svg.hpp"

using namespace muce;
namespace fs = std::filesystem;

namespace {

std::string tmp_root() {
    static std::string root = [] {
        std::string r = (fs::temp_directory_path() / "muce_test_cli").string();
        fs::remove_all(r);
        fs::create_directories(r);
        return r;
    }();
    return root;
}

std::string smoke_cfg_text(const std::string& out) {
    return std::string(R"({
  "seed": 7,
  "out": ")") +
           out + R"(",
  "scene": {"area": 30.0, "n_scatterers": 12},
  "system": {"n_tx": 8, "pilot_len": 6},
  "data": {"n_contrastive": 120, "n_downstream": 48, "n_test": 21, "snr_db": 20.0},
  "contrastive": {"n_negatives": 6, "positive_cap": 4, "anchor_batch": 16, "epochs": 2},
  "network": {"feature_dim": 16, "dense_hidden": 24},
  "downstream": {"q_max": 2, "epochs": 2, "group_batch": 8},
  "joint": {"group_batch": 8, "epochs": 2, "retrain_epochs": 2},
  "baselines": {"epochs": 2, "jomp_grid": 16, "jomp_sparsity": 3},
  "eval": {"k_users": 3, "snr_axis": [10, 20], "label_axis": [24, 48], "pilot_axis": [6],
           "similarity_pairs": 500}
})";
}

void run_pipeline(const std::string& out) {
    cfg::ExperimentConfig c = cfg::parse_config_text(smoke_cfg_text(out));
    exp::cmd_generate(c, false);
    exp::cmd_train(c, "all");
    exp::cmd_evaluate(c, "snr");
    exp::cmd_evaluate(c, "labels");
    exp::cmd_evaluate(c, "pilot");
    exp::cmd_evaluate(c, "grid");
    exp::cmd_similarity_study(c);
}

const std::string& pipeline_dir() {
    static std::string dir = [] {
        std::string d = tmp_root() + "/pipeA";
        run_pipeline(d);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("config defaults, overrides, and rejection") {
    cfg::ExperimentConfig d = cfg::parse_config_text("{}");
    CHECK(d.seed == 1);
    CHECK(d.system.n_tx == 56);
    CHECK(d.system.pilot_len == 24);
    CHECK(d.system.wavelength == 0.12);
    CHECK(d.system.bs.x == -50.0);
    CHECK(d.system.bs.y == 50.0);
    CHECK(d.n_contrastive == 4979);
    CHECK(d.n_downstream == 1500);
    CHECK(d.n_test == 500);
    CHECK(d.feature_dim == 112);
    CHECK(d.q_max == 3);
    CHECK(d.contrastive.d == 2.0);
    CHECK(d.contrastive.tau == 0.1);
    CHECK(d.joint.alpha == 0.8);
    CHECK(d.k_users == 5);
    CHECK(d.snr_axis == std::vector<double>{0, 5, 10, 15, 20, 25});
    CHECK(d.clnet_arch().input_len == 48);
    CHECK(d.clnet_arch().m == 112);

    cfg::ExperimentConfig o = cfg::parse_config_text(
        R"({"seed": 9, "out": "x", "system": {"n_tx": 8, "pilot_len": 6},
            "downstream": {"q_max": 2}, "eval": {"snr_axis": [5]}})");
    CHECK(o.seed == 9);
    CHECK(o.out == "x");
    CHECK(o.system.n_tx == 8);
    CHECK(o.q_max == 2);
    CHECK(o.snr_axis == std::vector<double>{5});
    CHECK(o.clnet_arch().input_len == 12);

    CHECK_THROWS_AS(cfg::parse_config_text("not json"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text("[1]"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"bogus": 1})"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg::parse_config_text(R"({"scene": {"foo": 1}})"),
                         doctest::Contains("scene.foo"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg::parse_config_text(R"({"eval": {"snr_axes": [0]}})"),
                         doctest::Contains("eval.snr_axes"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"seed": "one"})"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"scene": 5})"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"data": {"n_test": 0}})"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"system": {"n_tx": -3}})"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"contrastive": {"tau": 0.0}})"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_config_text(R"({"eval": {"label_axis": []}})"), ConfigError);

    CHECK_THROWS_AS(cfg::parse_config(tmp_root() + "/no_such.json"), IoError);
    const std::string p = tmp_root() + "/cfg_ok.json";
    io::write_bytes(p, smoke_cfg_text("somewhere"));
    CHECK(cfg::parse_config(p).out == "somewhere");
}

TEST_CASE("csv fields are shortest round-trip forms") {
    CHECK(csv::num_field(0.0) == "0");
    CHECK(csv::num_field(-0.0) == "-0");
    CHECK(csv::num_field(10.0) == "10");
    CHECK(csv::num_field(-3.0) == "-3");
    CHECK(csv::num_field(0.1) == "0.1");
    CHECK(csv::num_field(2.5) == "2.5");
    CHECK(csv::num_field(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(csv::num_field(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(csv::num_field(std::nan("")) == "nan");
    for (double v : {1.0 / 3.0, 1e300, -1e-300, 1e15, 6.02214076e23, 0.30917843177955684}) {
        const std::string s = csv::num_field(v);
        double back = 0.0;
        REQUIRE(std::sscanf(s.c_str(), "%lf", &back) == 1);
        CHECK(back == v);
    }
}

TEST_CASE("csv writer emits exact bytes and refuses quoting") {
    const std::string p = tmp_root() + "/t.csv";
    csv::write(p, {"a", "b"}, {{"1", "2"}, {"x", "0.5"}});
    CHECK(io::read_bytes(p) == "a,b\n1,2\nx,0.5\n");
    csv::write(p, {"only"}, {});
    CHECK(io::read_bytes(p) == "only\n");
    CHECK_THROWS_AS(csv::write(p, {"a,b"}, {}), UsageError);
    CHECK_THROWS_AS(csv::write(p, {"a"}, {{"has\"quote"}}), UsageError);
    CHECK_THROWS_AS(csv::write(p, {"a"}, {{"two\nlines"}}), UsageError);
    CHECK_THROWS_AS(csv::write(p, {"a", "b"}, {{"1"}}), DimensionError);
}

TEST_CASE("svg plots are self-contained documents") {
    const std::string p = tmp_root() + "/plot.svg";
    const double nan = std::nan("");
    svg::write_line_plot(p, "t", "x", "y",
                         {{"alpha", {0, 1, 2, 3}, {1, 2, nan, 4}}, {"beta", {0, 1}, {-1, -2}}});
    const std::string s = io::read_bytes(p);
    CHECK(s.find("<svg") != std::string::npos);
    CHECK(s.find("</svg>") != std::string::npos);
    CHECK(s.find("polyline") != std::string::npos);
    CHECK(s.find("alpha") != std::string::npos);
    CHECK(s.find("beta") != std::string::npos);
    CHECK(s.find("<script") == std::string::npos);
    CHECK(s.find("href") == std::string::npos);

    svg::write_line_plot(p, "empty", "x", "y", {});
    CHECK(io::read_bytes(p).find("</svg>") != std::string::npos);

    const std::string m = tmp_root() + "/map.svg";
    svg::write_position_map(m, "m", {1, 2, 3}, {4, 5, 6}, {-10, 0, 10});
    const std::string ms = io::read_bytes(m);
    CHECK(ms.find("<svg") != std::string::npos);
    CHECK(ms.find("circle") != std::string::npos);
    CHECK(ms.find("<script") == std::string::npos);
}

TEST_CASE("manifest records and verifies content hashes") {
    const std::string dir = tmp_root() + "/man";
    fs::create_directories(dir);
    io::write_bytes(dir + "/a.txt", "hello");
    io::write_bytes(dir + "/b.txt", "world");
    const std::string h1 = man::hash_file_hex(dir + "/a.txt");
    CHECK(h1.size() == 16);
    CHECK(h1 != man::hash_file_hex(dir + "/b.txt"));

    man::record(dir, {"a.txt"});
    CHECK_NOTHROW(man::check(dir, "a.txt"));
    CHECK_THROWS_AS(man::check(dir, "b.txt"), IoError);  // never recorded
    man::record(dir, {"b.txt"});
    CHECK_NOTHROW(man::check(dir, "b.txt"));
    CHECK_NOTHROW(man::check(dir, "a.txt"));  // first record survives the second

    io::write_bytes(dir + "/a.txt", "hellp");
    CHECK_THROWS_AS(man::check(dir, "a.txt"), IoError);
    man::record(dir, {"a.txt"});
    CHECK_NOTHROW(man::check(dir, "a.txt"));

    io::write_bytes(dir + "/manifest.json", "present but broken");
    CHECK_THROWS_AS(man::load(dir), IoError);
    CHECK(man::load(tmp_root() + "/man_absent").entries.empty());
}

TEST_CASE("generate writes loadable datasets and respects --force") {
    const std::string out = tmp_root() + "/gen";
    cfg::ExperimentConfig c = cfg::parse_config_text(smoke_cfg_text(out));
    exp::cmd_generate(c, false);
    for (const char* f : {"data/contrastive.meta", "data/contrastive.bin", "data/downstream.meta",
                          "data/downstream.bin", "data/test.meta", "data/test.bin",
                          "manifest.json"})
        CHECK(io::file_exists(out + "/" + f));

    // stored payloads equal a direct in-memory build
    sim::Scene scene = sim::generate_scene(sim::Rect{0, 0, c.area, c.area}, c.n_scatterers, c.seed);
    sim::DatasetBundle b = sim::build_datasets(
        scene, c.system, {c.n_contrastive, c.n_downstream, c.n_test}, c.snr_db, c.seed);
    sim::Dataset down = sim::load_dataset(out + "/data/downstream");
    CHECK(down.labeled);
    CHECK(down.count == 48);
    CHECK(down.positions == b.downstream.positions);
    CHECK(down.Y == b.downstream.Y);
    CHECK(down.H == b.downstream.H);
    CHECK(down.y_real == b.downstream.y_real);
    CHECK(down.pilot_seed == b.pilot.seed);
    sim::Dataset con = sim::load_dataset(out + "/data/contrastive");
    CHECK_FALSE(con.labeled);
    CHECK(con.H.empty());

    CHECK_THROWS_AS(exp::cmd_generate(c, false), UsageError);  // refuses to clobber
    CHECK_NOTHROW(exp::cmd_generate(c, true));
}

TEST_CASE("train stages demand their prerequisites") {
    const std::string out = tmp_root() + "/stages";
    cfg::ExperimentConfig c = cfg::parse_config_text(smoke_cfg_text(out));
    CHECK_THROWS_AS(exp::cmd_train(c, "clnet"), UsageError);  // no data yet
    exp::cmd_generate(c, false);
    CHECK_THROWS_WITH_AS(exp::cmd_train(c, "dsnet:1"), doctest::Contains("clnet"), UsageError);
    CHECK_THROWS_WITH_AS(exp::cmd_train(c, "joint"), doctest::Contains("clnet"), UsageError);
    CHECK_THROWS_AS(exp::cmd_similarity_study(c), UsageError);
    CHECK_THROWS_AS(exp::cmd_evaluate(c, "grid"), UsageError);  // no stage models at all

    CHECK_THROWS_AS(exp::cmd_train(c, "dsnet:0"), UsageError);
    CHECK_THROWS_AS(exp::cmd_train(c, "dsnet:9"), UsageError);
    CHECK_THROWS_AS(exp::cmd_train(c, "dsnet:x"), UsageError);
    CHECK_THROWS_AS(exp::cmd_train(c, "warp"), UsageError);
    CHECK_THROWS_AS(exp::cmd_evaluate(c, "speed"), UsageError);

    exp::cmd_train(c, "clnet");
    CHECK_THROWS_WITH_AS(exp::cmd_train(c, "joint"), doctest::Contains("dsnet:2"), UsageError);
    exp::cmd_train(c, "dsnet:2");
    CHECK_NOTHROW(exp::cmd_train(c, "joint"));  // top net alone satisfies the joint stage
}

TEST_CASE("prefix_labels keeps the leading samples intact") {
    const std::string& dir = pipeline_dir();
    sim::Dataset full = sim::load_dataset(dir + "/data/downstream");
    sim::Dataset sub = exp::prefix_labels(full, 10);
    CHECK(sub.count == 10);
    CHECK(sub.labeled);
    CHECK(std::equal(sub.Y.begin(), sub.Y.end(), full.Y.begin()));
    CHECK(std::equal(sub.H.begin(), sub.H.end(), full.H.begin()));
    CHECK(std::equal(sub.positions.begin(), sub.positions.end(), full.positions.begin()));
    CHECK(sub.y_real.size() == size_t(10 * 2 * full.sys.meas_dim()));
    sim::Dataset whole = exp::prefix_labels(full, full.count);
    CHECK(whole.Y == full.Y);
    CHECK_THROWS_AS(exp::prefix_labels(full, 0), ConfigError);
    CHECK_THROWS_AS(exp::prefix_labels(full, full.count + 1), ConfigError);
}

TEST_CASE("full pipeline leaves the expected artifacts") {
    const std::string& dir = pipeline_dir();
    for (const char* f :
         {"models/clnet.bin", "models/dsnet1.bin", "models/dsnet2.bin", "models/separate.json",
          "models/joint_clnet.bin", "models/joint_dsnet1.bin", "models/joint_dsnet2.bin",
          "models/joint.json", "models/single_user.bin", "models/location2.bin",
          "traces/clnet_loss.csv", "traces/dsnet1_loss.csv", "traces/joint_loss.csv",
          "traces/joint_dsnet1_loss.csv", "traces/single_user_loss.csv",
          "traces/location2_loss.csv", "results/evaluate_snr.csv", "results/evaluate_snr.svg",
          "results/evaluate_labels.csv", "results/evaluate_pilot.csv", "results/evaluate_grid.csv",
          "results/evaluate_grid.svg", "results/similarity.csv", "results/similarity.svg"})
        CHECK_MESSAGE(io::file_exists(dir + "/" + std::string(f)), f);

    const std::string snr = io::read_bytes(dir + "/results/evaluate_snr.csv");
    CHECK(snr.rfind("method,snr_db,nmse,nmse_db,n_test,seed\n", 0) == 0);
    for (const char* m : {"proposed-joint", "proposed-separate", "single-user", "location", "jomp"})
        CHECK_MESSAGE(snr.find(m) != std::string::npos, m);
    CHECK(snr.find(",21,7\n") != std::string::npos);  // n_test and seed columns

    const std::string lab = io::read_bytes(dir + "/results/evaluate_labels.csv");
    CHECK(lab.rfind("method,n_labels,", 0) == 0);
    CHECK(lab.find("jomp") == std::string::npos);  // label count cannot move it
    CHECK(lab.find(",24,") != std::string::npos);
    CHECK(lab.find(",48,") != std::string::npos);

    const std::string grid = io::read_bytes(dir + "/results/evaluate_grid.csv");
    CHECK(grid.rfind("x,y,nmse,nmse_db\n", 0) == 0);
    CHECK(std::count(grid.begin(), grid.end(), '\n') == 22);  // header + one row per test user

    const std::string simcsv = io::read_bytes(dir + "/results/similarity.csv");
    CHECK(simcsv.rfind("bin_lo,bin_hi,count,raw_mean,feature_mean\n", 0) == 0);
    CHECK(std::count(simcsv.begin(), simcsv.end(), '\n') == 9);  // 8 fixed bins

    // every file the manifest names verifies
    man::Manifest m = man::load(dir);
    CHECK(m.entries.size() >= 24);
    for (const auto& [rel, hash] : m.entries) CHECK_NOTHROW(man::check(dir, rel));
}

TEST_CASE("the pipeline is bit-for-bit deterministic") {
    const std::string& a = pipeline_dir();
    const std::string b = tmp_root() + "/pipeB";
    run_pipeline(b);
    size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), a).string();
        CAPTURE(rel);
        REQUIRE(io::file_exists(b + "/" + rel));
        CHECK(io::read_bytes(e.path().string()) == io::read_bytes(b + "/" + rel));
        ++compared;
    }
    CHECK(compared >= 30);
}

TEST_CASE("evaluation carries on when a model is missing") {
    const std::string dir = tmp_root() + "/missing";
    fs::copy(pipeline_dir(), dir, fs::copy_options::recursive);
    fs::remove(dir + "/models/location2.meta");
    fs::remove(dir + "/models/location2.bin");
    cfg::ExperimentConfig c = cfg::parse_config_text(smoke_cfg_text(dir));
    exp::cmd_evaluate(c, "snr");
    const std::string snr = io::read_bytes(dir + "/results/evaluate_snr.csv");
    CHECK(snr.find("location") == std::string::npos);
    for (const char* m : {"proposed-joint", "proposed-separate", "single-user", "jomp"})
        CHECK_MESSAGE(snr.find(m) != std::string::npos, m);

    // with no models at all, the sparse-recovery baseline still answers
    const std::string bare = tmp_root() + "/bare";
    fs::create_directories(bare + "/data");
    for (const char* f : {"/data/test.meta", "/data/test.bin"})
        fs::copy(pipeline_dir() + f, bare + f);
    man::record(bare, {"data/test.meta", "data/test.bin"});
    cfg::ExperimentConfig cb = cfg::parse_config_text(smoke_cfg_text(bare));
    exp::cmd_evaluate(cb, "snr");
    const std::string only = io::read_bytes(bare + "/results/evaluate_snr.csv");
    CHECK(only.find("jomp") != std::string::npos);
    CHECK(only.find("proposed") == std::string::npos);
}

TEST_CASE("tampered artifacts are rejected by evaluation") {
    const std::string dir = tmp_root() + "/tamper";
    fs::copy(pipeline_dir(), dir, fs::copy_options::recursive);
    std::string bytes = io::read_bytes(dir + "/models/clnet.bin");
    bytes[bytes.size() / 2] ^= 0x40;
    io::write_bytes(dir + "/models/clnet.bin", bytes);
    cfg::ExperimentConfig c = cfg::parse_config_text(smoke_cfg_text(dir));
    CHECK_THROWS_AS(exp::cmd_evaluate(c, "grid"), IoError);
    CHECK_THROWS_AS(exp::cmd_similarity_study(c), IoError);
}

TEST_CASE("command line binary dispatches and reports errors") {
    if (!io::file_exists("./muce")) return;  // exercised only from the build directory
    CHECK(std::system("./muce --help > /dev/null 2>&1") == 0);
    CHECK(std::system("./muce > /dev/null 2>&1") != 0);                     // subcommand required
    CHECK(std::system("./muce fly > /dev/null 2>&1") != 0);                 // unknown subcommand
    CHECK(std::system("./muce train --stage warp > /dev/null 2>&1") != 0);  // usage error path
    CHECK(std::system("./muce generate --config nope.json > /dev/null 2>&1") != 0);  // io error

    const std::string out = tmp_root() + "/cli_bin";
    const std::string cfgp = tmp_root() + "/cli_bin.json";
    io::write_bytes(cfgp, smoke_cfg_text("ignored"));
    const std::string base = "./muce generate --config " + cfgp + " --out " + out;
    CHECK(std::system((base + " > /dev/null 2>&1").c_str()) == 0);
    CHECK(io::file_exists(out + "/data/test.bin"));
    CHECK(std::system((base + " > /dev/null 2>&1").c_str()) != 0);  // refuses without --force
    CHECK(std::system((base + " --force > /dev/null 2>&1").c_str()) == 0);

    // a seed override must actually change the draw
    CHECK(std::system((base + " --force --seed 8 > /dev/null 2>&1").c_str()) == 0);
    sim::Dataset seeded = sim::load_dataset(out + "/data/test");
    CHECK(seeded.seed == 8);
    sim::Dataset original = sim::load_dataset(pipeline_dir() + "/data/test");
    CHECK(seeded.positions != original.positions);
}
