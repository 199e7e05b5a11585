#include <doctest.h>

#include <set>

#include "muce/dataset.hpp"
#include "muce/errors.hpp"
#include "muce/io.hpp"

using namespace muce;
using namespace muce::sim;

namespace {
SystemConfig tiny_sys() {
    SystemConfig sys;
    sys.n_tx = 16;
    sys.pilot_len = 8;
    return sys;
}

DatasetBundle tiny_bundle(uint64_t seed, double snr = 20.0) {
    Scene scene = generate_scene(Rect{}, 30, 100 + seed);
    return build_datasets(scene, tiny_sys(), {10, 5, 5}, snr, seed);
}
}  // namespace

TEST_CASE("build_datasets splits sizes and keeps positions distinct") {
    DatasetBundle b = tiny_bundle(1);
    CHECK(b.contrastive.count == 10);
    CHECK(b.downstream.count == 5);
    CHECK(b.test.count == 5);
    CHECK(!b.contrastive.labeled);
    CHECK(b.downstream.labeled);
    CHECK(b.test.labeled);
    CHECK(b.contrastive.H.empty());
    CHECK(b.downstream.H.size() == size_t(5 * tiny_sys().chan_dim()));

    std::set<std::pair<double, double>> pts;
    for (const Dataset* ds : {&b.contrastive, &b.downstream, &b.test})
        for (int64_t i = 0; i < ds->count; ++i) pts.insert({ds->pos(i).x, ds->pos(i).y});
    CHECK(pts.size() == 20);

    CHECK_THROWS_AS(
        build_datasets(generate_scene(Rect{}, 3, 1), tiny_sys(), {0, 1, 1}, 20.0, 1),
        ConfigError);
}

TEST_CASE("same seed reproduces the bundle bit-for-bit") {
    DatasetBundle a = tiny_bundle(2);
    DatasetBundle b = tiny_bundle(2);
    CHECK(a.pilot.S.v == b.pilot.S.v);
    CHECK(a.contrastive.Y == b.contrastive.Y);
    CHECK(a.test.H == b.test.H);
    CHECK(a.test.y_real == b.test.y_real);
}

TEST_CASE("different seeds give disjoint position draws") {
    std::set<std::pair<double, double>> firsts;
    for (uint64_t s = 0; s < 1000; ++s) {
        Rng rng = Rng::derive(s, "data/positions");
        firsts.insert({rng.uniform(0, 100), rng.uniform(0, 100)});
    }
    CHECK(firsts.size() == 1000);

    DatasetBundle a = tiny_bundle(3);
    DatasetBundle b = tiny_bundle(4);
    std::set<std::pair<double, double>> pa, common;
    for (int64_t i = 0; i < a.contrastive.count; ++i)
        pa.insert({a.contrastive.pos(i).x, a.contrastive.pos(i).y});
    for (int64_t i = 0; i < b.contrastive.count; ++i)
        if (pa.count({b.contrastive.pos(i).x, b.contrastive.pos(i).y}))
            common.insert({b.contrastive.pos(i).x, b.contrastive.pos(i).y});
    CHECK(common.empty());
}

TEST_CASE("y_real always equals the stacked-real image of Y") {
    DatasetBundle b = tiny_bundle(5);
    const Dataset& ds = b.downstream;
    for (int64_t i = 0; i < ds.count; ++i) {
        CMat Y(ds.sys.n_rx, ds.sys.meas_dim() / ds.sys.n_rx);
        std::copy_n(ds.Y_row(i), size_t(ds.sys.meas_dim()), Y.v.begin());
        std::vector<double> want = nu(vec(Y));
        std::vector<double> got(ds.y_row(i), ds.y_row(i) + 2 * ds.sys.meas_dim());
        CHECK(got == want);
    }
}

TEST_CASE("save/load round-trips bit-exactly for both kinds") {
    DatasetBundle b = tiny_bundle(6);
    for (const Dataset* ds : {&b.contrastive, &b.test}) {
        const std::string stem = ds->labeled ? "ds_rt_labeled" : "ds_rt_contrastive";
        save_dataset(*ds, stem);
        Dataset back = load_dataset(stem);
        CHECK(back.labeled == ds->labeled);
        CHECK(back.count == ds->count);
        CHECK(back.positions == ds->positions);
        CHECK(back.Y == ds->Y);
        CHECK(back.H == ds->H);
        CHECK(back.y_real == ds->y_real);
        CHECK(back.snr_db == ds->snr_db);
        CHECK(back.seed == ds->seed);
        CHECK(back.pilot_seed == ds->pilot_seed);
        CHECK(back.sys.n_tx == ds->sys.n_tx);
        CHECK(back.sys.pilot_len == ds->sys.pilot_len);
    }
}

TEST_CASE("corrupt or malformed files are rejected with the path") {
    DatasetBundle b = tiny_bundle(7);
    save_dataset(b.test, "ds_corrupt");

    SUBCASE("flipped payload byte") {
        std::string bin = io::read_bytes("ds_corrupt.bin");
        bin[bin.size() / 2] ^= 0x01;
        io::write_bytes("ds_corrupt.bin", bin);
        CHECK_THROWS_AS(load_dataset("ds_corrupt"), IoError);
    }
    SUBCASE("truncated payload") {
        std::string bin = io::read_bytes("ds_corrupt.bin");
        bin.resize(bin.size() - 8);
        io::write_bytes("ds_corrupt.bin", bin);
        CHECK_THROWS_AS(load_dataset("ds_corrupt"), IoError);
    }
    SUBCASE("unknown meta key") {
        std::string meta = io::read_bytes("ds_corrupt.meta");
        io::write_bytes("ds_corrupt.meta", meta + "surprise 1\n");
        CHECK_THROWS_AS(load_dataset("ds_corrupt"), IoError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_dataset("ds_never_written"), IoError); }
}

TEST_CASE("remeasure keeps geometry, refreshes noise, honors noiseless") {
    DatasetBundle b = tiny_bundle(8);
    Dataset at10 = remeasure(b.test, b.pilot, 10.0, 8, "snr/10");
    CHECK(at10.positions == b.test.positions);
    CHECK(at10.H == b.test.H);
    CHECK(at10.snr_db == 10.0);
    CHECK(at10.Y != b.test.Y);

    const double inf = std::numeric_limits<double>::infinity();
    Dataset clean1 = remeasure(b.test, b.pilot, inf, 8, "snr/inf");
    Dataset clean2 = remeasure(b.test, b.pilot, inf, 999, "other");
    CHECK(clean1.Y == clean2.Y);  // noiseless: independent of the noise stream

    CHECK_THROWS_AS(remeasure(b.contrastive, b.pilot, 10.0, 8, "x"), UsageError);
}
