#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

#include "doctest.h"
#include "muce/baselines.hpp"
#include "muce/dataset.hpp"
#include "muce/errors.hpp"
#include "muce/rng.hpp"

using namespace muce;
using sim::cplx;

namespace {

sim::DatasetBundle small_bundle(sim::DatasetSizes sizes, double snr_db, uint64_t seed) {
    sim::Rect area{0.0, 0.0, 30.0, 30.0};
    auto scene = sim::generate_scene(area, 50, seed);
    sim::SystemConfig sys;
    return sim::build_datasets(scene, sys, sizes, snr_db, seed);
}

std::vector<cplx> measure_exact(const sim::PilotMatrix& pilot, const std::vector<cplx>& h) {
    std::vector<cplx> y(static_cast<size_t>(pilot.S.cols), cplx{0.0, 0.0});
    for (int64_t l = 0; l < pilot.S.cols; ++l)
        for (int64_t n = 0; n < pilot.S.rows; ++n)
            y[static_cast<size_t>(l)] += pilot.S.at(n, l) * h[static_cast<size_t>(n)];
    return y;
}

std::vector<cplx> residual_of(const sim::PilotMatrix& pilot, const std::vector<cplx>& y,
                              const std::vector<cplx>& h_est) {
    auto pred = measure_exact(pilot, h_est);
    std::vector<cplx> r(y.size());
    for (size_t i = 0; i < y.size(); ++i) r[i] = y[i] - pred[i];
    return r;
}

// |phi_g^H r| for one dictionary column g
double corr_abs(const sim::PilotMatrix& pilot, const base::AngularDictionary& dict, int64_t g,
                const std::vector<cplx>& r) {
    cplx acc{0.0, 0.0};
    for (int64_t l = 0; l < pilot.S.cols; ++l) {
        cplx phi{0.0, 0.0};
        for (int64_t n = 0; n < pilot.S.rows; ++n) phi += pilot.S.at(n, l) * dict.A.at(n, g);
        acc += std::conj(phi) * r[static_cast<size_t>(l)];
    }
    return std::abs(acc);
}

bool same_params(const num::ModelParams& a, const num::ModelParams& b) {
    if (a.count() != b.count()) return false;
    for (int64_t i = 0; i < a.count(); ++i) {
        if (a.name(i) != b.name(i)) return false;
        if (a.tensor(i).v != b.tensor(i).v) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("kmeans recovers separated blobs and honors the degenerate cases") {
    std::vector<sim::Vec2> pts = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {50, 50}, {51, 50}, {50, 51}, {51, 51}};
    for (uint64_t seed : {1ull, 7ull, 23ull}) {
        auto r = base::kmeans(pts, 2, seed);
        REQUIRE(r.assign.size() == pts.size());
        for (size_t i = 1; i < 4; ++i) CHECK(r.assign[i] == r.assign[0]);
        for (size_t i = 5; i < 8; ++i) CHECK(r.assign[i] == r.assign[4]);
        CHECK(r.assign[0] != r.assign[4]);
        CHECK(r.iterations >= 1);
        CHECK(r.iterations <= 100);
    }

    SUBCASE("k = 1 gives the mean as centroid") {
        auto r = base::kmeans(pts, 1, 3);
        double mx = 0, my = 0;
        for (auto p : pts) {
            mx += p.x;
            my += p.y;
        }
        CHECK(r.centroids[0].x == doctest::Approx(mx / 8).epsilon(1e-12));
        CHECK(r.centroids[0].y == doctest::Approx(my / 8).epsilon(1e-12));
        for (auto a : r.assign) CHECK(a == 0);
    }

    SUBCASE("k = #points puts every point on its own centroid") {
        auto r = base::kmeans(pts, static_cast<int64_t>(pts.size()), 11);
        std::set<int64_t> used(r.assign.begin(), r.assign.end());
        CHECK(used.size() == pts.size());
        for (size_t i = 0; i < pts.size(); ++i) {
            CHECK(sim::dist(pts[i], r.centroids[static_cast<size_t>(r.assign[i])]) == 0.0);
        }
    }

    SUBCASE("bad k is rejected") {
        CHECK_THROWS_AS(base::kmeans(pts, 0, 1), ConfigError);
        CHECK_THROWS_AS(base::kmeans(pts, 9, 1), ConfigError);
    }

    SUBCASE("deterministic in the seed") {
        auto a = base::kmeans(pts, 3, 42);
        auto b = base::kmeans(pts, 3, 42);
        CHECK(a.assign == b.assign);
        for (size_t c = 0; c < a.centroids.size(); ++c) {
            CHECK(a.centroids[c].x == b.centroids[c].x);
            CHECK(a.centroids[c].y == b.centroids[c].y);
        }
    }
}

TEST_CASE("angular dictionary columns are unit-modulus steering vectors") {
    auto d = base::make_dictionary(56, 112);
    REQUIRE(d.A.rows == 56);
    REQUIRE(d.A.cols == 112);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int64_t g = 0; g < d.grid; ++g) {
        double acc = 0.0;
        cplx gram_off{0.0, 0.0};
        for (int64_t n = 0; n < d.n_tx; ++n) {
            const double mod2 = std::norm(d.A.at(n, g));
            CHECK(std::abs(mod2 - 1.0) <= 4 * eps);
            acc += mod2;
            gram_off += std::conj(d.A.at(n, g)) * d.A.at(n, g);
        }
        CHECK(std::abs(acc - 56.0) <= 56.0 * 8 * eps);  // Gram diagonal == n_tx up to roundoff
        CHECK(gram_off.imag() == 0.0);                  // conj(z)*z is exactly real
    }
    // first column steers near sin(theta) = -1 + 1/G, last near +1 - 1/G
    CHECK(std::arg(d.A.at(1, 0)) == doctest::Approx(std::numbers::pi * (1.0 - 1.0 / 112.0)).epsilon(1e-12));
    CHECK_THROWS_AS(base::make_dictionary(0, 8), ConfigError);
    CHECK_THROWS_AS(base::make_dictionary(8, 0), ConfigError);
}

TEST_CASE("jomp nails a single on-grid user at full sampling in one step") {
    const int64_t n_tx = 32, grid = 40;
    auto dict = base::make_dictionary(n_tx, grid);
    sim::PilotMatrix pilot;
    pilot.S = sim::CMat(n_tx, n_tx);
    for (int64_t n = 0; n < n_tx; ++n) pilot.S.at(n, n) = cplx{1.0, 0.0};

    const int64_t gstar = 17;
    const cplx c{0.8, -0.3};
    std::vector<cplx> h(static_cast<size_t>(n_tx));
    for (int64_t n = 0; n < n_tx; ++n) h[static_cast<size_t>(n)] = dict.A.at(n, gstar) * c;

    auto res = base::jomp({h /* S = I so y = h */}, pilot, dict, {4, 1e-6});
    REQUIRE(res.support == std::vector<int64_t>{gstar});
    REQUIRE(res.residual_norms[0].size() == 2);  // initial + the single iteration
    CHECK(res.residual_norms[0][1] < 1e-9);
    CHECK_FALSE(res.rank_deficient);
    for (int64_t n = 0; n < n_tx; ++n) {
        CHECK(std::abs(res.h[0][static_cast<size_t>(n)] - h[static_cast<size_t>(n)]) < 1e-9);
    }
}

TEST_CASE("jomp recovers a shared support and keeps its invariants") {
    const int64_t n_tx = 32, grid = 48, users = 5, sparsity = 4;
    sim::SystemConfig sys;
    sys.n_tx = n_tx;
    sys.pilot_len = 24;
    auto dict = base::make_dictionary(n_tx, grid);

    int64_t exact = 0;
    const int64_t trials = 30;
    for (int64_t trial = 0; trial < trials; ++trial) {
        auto pilot = sim::generate_pilot(sys, 9000 + static_cast<uint64_t>(trial));
        Rng rng(500 + static_cast<uint64_t>(trial));

        // common support, per-user coefficients
        std::set<int64_t> supp;
        while (static_cast<int64_t>(supp.size()) < sparsity)
            supp.insert(static_cast<int64_t>(rng.below(static_cast<uint64_t>(grid))));
        std::vector<std::vector<cplx>> y;
        for (int64_t k = 0; k < users; ++k) {
            std::vector<cplx> h(static_cast<size_t>(n_tx), cplx{0.0, 0.0});
            for (int64_t g : supp) {
                const cplx c = rng.cnormal();
                for (int64_t n = 0; n < n_tx; ++n) h[static_cast<size_t>(n)] += dict.A.at(n, g) * c;
            }
            y.push_back(measure_exact(pilot, h));
        }

        auto res = base::jomp(y, pilot, dict, {sparsity, 1e-8});

        std::set<int64_t> got(res.support.begin(), res.support.end());
        CHECK(got.size() == res.support.size());  // no index picked twice
        if (got == supp) ++exact;

        for (int64_t k = 0; k < users; ++k) {
            const auto& rn = res.residual_norms[static_cast<size_t>(k)];
            for (size_t i = 1; i < rn.size(); ++i) CHECK(rn[i] <= rn[i - 1] + 1e-10);
            auto r = residual_of(pilot, y[static_cast<size_t>(k)], res.h[static_cast<size_t>(k)]);
            double nr = 0.0;
            for (auto z : r) nr += std::norm(z);
            CHECK(std::sqrt(nr) == doctest::Approx(rn.back()).epsilon(1e-6).scale(1.0));
            for (int64_t g : res.support) CHECK(corr_abs(pilot, dict, g, r) < 1e-9);
        }
    }
    CHECK(exact >= trials - 2);

    SUBCASE("prefix runs match the full greedy path and stay orthogonal") {
        auto pilot = sim::generate_pilot(sys, 7777);
        Rng rng(321);
        std::set<int64_t> supp = {3, 11, 27, 35};
        std::vector<std::vector<cplx>> y;
        for (int64_t k = 0; k < users; ++k) {
            std::vector<cplx> h(static_cast<size_t>(n_tx), cplx{0.0, 0.0});
            for (int64_t g : supp) {
                const cplx c = rng.cnormal();
                for (int64_t n = 0; n < n_tx; ++n) h[static_cast<size_t>(n)] += dict.A.at(n, g) * c;
            }
            y.push_back(measure_exact(pilot, h));
        }
        auto full = base::jomp(y, pilot, dict, {sparsity, 1e-8});
        for (int64_t t = 1; t <= sparsity; ++t) {
            auto part = base::jomp(y, pilot, dict, {t, 1e-8});
            REQUIRE(static_cast<int64_t>(part.support.size()) == t);
            for (int64_t i = 0; i < t; ++i) CHECK(part.support[static_cast<size_t>(i)] == full.support[static_cast<size_t>(i)]);
            for (int64_t k = 0; k < users; ++k) {
                auto r = residual_of(pilot, y[static_cast<size_t>(k)], part.h[static_cast<size_t>(k)]);
                for (int64_t g : part.support) CHECK(corr_abs(pilot, dict, g, r) < 1e-9);
            }
        }
    }
}

TEST_CASE("jomp edge cases") {
    const int64_t n_tx = 8;
    sim::SystemConfig sys;
    sys.n_tx = n_tx;
    sys.pilot_len = 6;
    auto dict = base::make_dictionary(n_tx, 12);
    auto pilot = sim::generate_pilot(sys, 4);
    Rng rng(88);
    std::vector<std::vector<cplx>> y(2, std::vector<cplx>(6));
    for (auto& yk : y)
        for (auto& z : yk) z = rng.cnormal();

    SUBCASE("zero sparsity returns zero estimates") {
        auto res = base::jomp(y, pilot, dict, {0, 1e-6});
        CHECK(res.support.empty());
        for (auto& h : res.h)
            for (auto z : h) CHECK(z == cplx{0.0, 0.0});
        for (size_t k = 0; k < 2; ++k) {
            REQUIRE(res.residual_norms[k].size() == 1);
            double nr = 0.0;
            for (auto z : y[k]) nr += std::norm(z);
            CHECK(res.residual_norms[k][0] == doctest::Approx(std::sqrt(nr)).epsilon(1e-12));
        }
    }

    SUBCASE("a flat system trips the minimum-norm fallback") {
        sim::SystemConfig tiny;
        tiny.n_tx = 4;
        tiny.pilot_len = 2;
        auto d2 = base::make_dictionary(4, 6);
        auto p2 = sim::generate_pilot(tiny, 5);
        std::vector<std::vector<cplx>> y2(2, std::vector<cplx>(2));
        for (auto& yk : y2)
            for (auto& z : yk) z = rng.cnormal();
        auto res = base::jomp(y2, p2, d2, {3, 0.0});
        CHECK(res.support.size() == 3);
        CHECK(res.rank_deficient);
        for (auto& h : res.h)
            for (auto z : h) CHECK(std::isfinite(z.real()));
    }

    SUBCASE("input validation") {
        CHECK_THROWS_AS(base::jomp({}, pilot, dict, {2, 1e-6}), ConfigError);
        CHECK_THROWS_AS(base::jomp(y, pilot, dict, {-1, 1e-6}), ConfigError);
        std::vector<std::vector<cplx>> bad = y;
        bad[0].pop_back();
        CHECK_THROWS_AS(base::jomp(bad, pilot, dict, {2, 1e-6}), DimensionError);
        auto d3 = base::make_dictionary(n_tx + 1, 12);
        CHECK_THROWS_AS(base::jomp(y, pilot, d3, {2, 1e-6}), DimensionError);
    }
}

TEST_CASE("location grouping covers the data in exact-size chunks") {
    sim::Dataset ds;
    ds.count = 11;
    ds.positions.resize(22);
    Rng rng(64);
    for (auto& p : ds.positions) p = rng.uniform(0.0, 100.0);

    auto groups = base::location_groups(ds, 3, 5);
    std::vector<int64_t> flat;
    for (auto& g : groups) {
        CHECK(g.members.size() == 3);
        flat.insert(flat.end(), g.members.begin(), g.members.end());
    }
    std::sort(flat.begin(), flat.end());
    CHECK(std::adjacent_find(flat.begin(), flat.end()) == flat.end());
    CHECK(flat.size() == 9);  // 11 - (11 mod 3)

    auto singles = base::location_groups(ds, 1, 5);
    REQUIRE(singles.size() == 11);
    for (int64_t i = 0; i < 11; ++i) CHECK(singles[static_cast<size_t>(i)].members == std::vector<int64_t>{i});

    auto again = base::location_groups(ds, 3, 5);
    REQUIRE(again.size() == groups.size());
    for (size_t i = 0; i < groups.size(); ++i) CHECK(again[i].members == groups[i].members);

    CHECK_THROWS_AS(base::location_groups(ds, 0, 5), ConfigError);
    CHECK_THROWS_AS(base::location_groups(ds, 12, 5), ConfigError);
}

TEST_CASE("raw-measurement nets train and apply with the estimator layout") {
    auto bundle = small_bundle({4, 24, 4}, 20.0, 77);
    num::AdamConfig adam;
    adam.lr = 1e-3;

    SUBCASE("zero epochs returns the untouched init") {
        auto net = base::single_user_ce(bundle.downstream, adam, 0, 9);
        auto raw = dn::init_dsnet(net.arch, derive_seed(9, "rawnet/init", 1));
        CHECK(same_params(net.phi, raw));
        CHECK(net.arch.q == 1);
        CHECK(net.arch.m == 48);
    }

    SUBCASE("the loss falls and the run is reproducible") {
        auto net = base::single_user_ce(bundle.downstream, adam, 3, 9);
        REQUIRE(net.stats.epoch_loss.size() == 3);
        CHECK(net.stats.epoch_loss.back() < net.stats.epoch_loss.front());
        auto net2 = base::single_user_ce(bundle.downstream, adam, 3, 9);
        CHECK(same_params(net.phi, net2.phi));
    }

    SUBCASE("group size 1 location training is the single-user trainer, bit for bit") {
        auto a = base::single_user_ce(bundle.downstream, adam, 2, 13);
        auto b = base::location_based_ce(bundle.downstream, 1, adam, 2, 13);
        CHECK(same_params(a.phi, b.phi));
        CHECK(a.stats.epoch_loss == b.stats.epoch_loss);
    }

    SUBCASE("grouped training runs with exact-size location groups") {
        auto net = base::location_based_ce(bundle.downstream, 2, adam, 2, 21);
        CHECK(net.arch.q == 2);
        CHECK(net.arch.m == 48);
        REQUIRE(net.stats.epoch_loss.size() == 2);
        CHECK(std::isfinite(net.stats.epoch_loss.back()));

        // apply: column k of the output is the estimate for input row k
        num::Tensor rows = num::Tensor::zeros({2, 48});
        for (int64_t j = 0; j < 48; ++j) {
            rows.v[static_cast<size_t>(j)] = bundle.test.y_row(0)[j];
            rows.v[static_cast<size_t>(48 + j)] = bundle.test.y_row(1)[j];
        }
        auto est = base::apply_raw_net(net, rows);
        REQUIRE(est.rows == 56);
        REQUIRE(est.cols == 2);
        auto est2 = base::apply_raw_net(net, rows);
        for (size_t i = 0; i < est.v.size(); ++i) CHECK(est.v[i] == est2.v[i]);

        CHECK_THROWS_AS(base::apply_raw_net(net, num::Tensor::zeros({1, 48})), DimensionError);
        CHECK_THROWS_AS(base::apply_raw_net(base::RawNet{}, rows), UsageError);
    }

    SUBCASE("bad inputs are rejected") {
        CHECK_THROWS_AS(base::single_user_ce(bundle.contrastive, adam, 1, 9), UsageError);
        std::vector<dn::ClusterGroup> wrong = {{{0, 1}}};
        CHECK_THROWS_AS(base::train_raw_net(bundle.downstream, wrong, 3, adam, 1, 9), ConfigError);
        std::vector<dn::ClusterGroup> oob = {{{0, 999}}};
        CHECK_THROWS_AS(base::train_raw_net(bundle.downstream, oob, 2, adam, 1, 9), DimensionError);
        CHECK_THROWS_AS(base::train_raw_net(bundle.downstream, {}, 2, adam, 1, 9), TrainingError);
    }
}
