#include <doctest.h>

#include <cmath>

#include "muce/errors.hpp"
#include "muce/params.hpp"
#include "muce/rng.hpp"

using namespace muce;
using namespace muce::num;

namespace {
ModelParams two_params() {
    ModelParams p;
    p.add("w", Tensor::from({2}, {0.5, -1.5}));
    p.add("b", Tensor::from({1}, {0.25}));
    return p;
}
}  // namespace

TEST_CASE("ModelParams keeps registration order and rejects duplicates") {
    ModelParams p = two_params();
    CHECK(p.count() == 2);
    CHECK(p.name(0) == "w");
    CHECK(p.name(1) == "b");
    CHECK(p.at("b").v[0] == 0.25);
    CHECK_THROWS_AS(p.add("w", Tensor::zeros({1})), ConfigError);
    CHECK_THROWS_AS(p.add("bad name", Tensor::zeros({1})), ConfigError);
    CHECK_THROWS_AS(p.at("missing"), ConfigError);
    CHECK(p.total_size() == 3);
}

TEST_CASE("zero gradient, zero decay leaves parameters untouched") {
    ModelParams p = two_params();
    AdamState st;
    st.init(p);
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<Tensor> g = {Tensor::zeros({2}), Tensor::zeros({1})};
    st.update(p, g, cfg);
    CHECK(p.at("w").v == std::vector<double>{0.5, -1.5});
    CHECK(p.at("b").v[0] == 0.25);
    CHECK(st.step() == 1);
}

TEST_CASE("zero gradient with decay scales by (1 - lr*wd)") {
    ModelParams p = two_params();
    AdamState st;
    st.init(p);
    AdamConfig cfg;  // lr=1e-4, wd=0.01 → factor 1-1e-6
    std::vector<Tensor> g = {Tensor::zeros({2}), Tensor::zeros({1})};
    st.update(p, g, cfg);
    CHECK(p.at("w").v[0] == doctest::Approx(0.5 * (1 - 1e-6)).epsilon(1e-12));
    CHECK(p.at("w").v[1] == doctest::Approx(-1.5 * (1 - 1e-6)).epsilon(1e-12));
}

TEST_CASE("first step from zero matches the reference recurrence") {
    ModelParams p;
    p.add("w", Tensor::zeros({1}));
    AdamState st;
    st.init(p);
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<Tensor> g = {Tensor::from({1}, {1.0})};
    st.update(p, g, cfg);
    // mhat = 1, vhat = 1 at t=1 → θ = −lr/(1+eps)
    CHECK(p.at("w").v[0] == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("first-update magnitude bounded by lr regardless of gradient scale") {
    for (double scale : {1e-8, 1e-3, 1.0, 1e3, 1e8}) {
        ModelParams p;
        p.add("w", Tensor::from({3}, {0.1, -0.2, 0.3}));
        AdamState st;
        st.init(p);
        AdamConfig cfg;
        cfg.weight_decay = 0.0;
        std::vector<Tensor> g = {Tensor::from({3}, {scale, -scale, scale * 0.5})};
        Tensor before = p.at("w");
        st.update(p, g, cfg);
        for (size_t i = 0; i < 3; ++i)
            CHECK(std::fabs(p.at("w").v[i] - before.v[i]) <= cfg.lr * (1 + 1e-6));
    }
}

TEST_CASE("moments damp oscillating gradients over time") {
    ModelParams p;
    p.add("w", Tensor::from({1}, {1.0}));
    AdamState st;
    st.init(p);
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    for (int t = 0; t < 50; ++t) {
        std::vector<Tensor> g = {Tensor::from({1}, {t % 2 ? 1.0 : -1.0})};
        st.update(p, g, cfg);
    }
    CHECK(st.step() == 50);
    CHECK(std::fabs(p.at("w").v[0] - 1.0) < 50 * cfg.lr);  // net drift well under worst case
}

TEST_CASE("mismatched gradient list is rejected") {
    ModelParams p = two_params();
    AdamState st;
    st.init(p);
    AdamConfig cfg;
    std::vector<Tensor> wrong_count = {Tensor::zeros({2})};
    CHECK_THROWS_AS(st.update(p, wrong_count, cfg), DimensionError);
    std::vector<Tensor> wrong_shape = {Tensor::zeros({3}), Tensor::zeros({1})};
    CHECK_THROWS_AS(st.update(p, wrong_shape, cfg), DimensionError);
    AdamState uninit;
    std::vector<Tensor> ok = {Tensor::zeros({2}), Tensor::zeros({1})};
    CHECK_THROWS_AS(uninit.update(p, ok, cfg), ConfigError);
}

TEST_CASE("uniform init stays inside ±sqrt(1/fan_in) and varies") {
    Rng rng(5);
    Tensor t = init_uniform(rng, {64, 16}, 16);
    const double lim = std::sqrt(1.0 / 16.0);
    double mn = 1e9, mx = -1e9;
    for (double e : t.v) {
        CHECK(e >= -lim);
        CHECK(e < lim);
        mn = std::min(mn, e);
        mx = std::max(mx, e);
    }
    CHECK(mx - mn > lim);  // actually spread out
    CHECK_THROWS_AS(init_uniform(rng, {2, 2}, 0), ConfigError);
}

TEST_CASE("model save/load round-trips bit-exactly") {
    Rng rng(9);
    ModelParams p;
    p.add("layer0.w", init_uniform(rng, {5, 7}, 7));
    p.add("layer0.b", init_uniform(rng, {5}, 7));
    p.add("head.w", init_uniform(rng, {2, 5}, 5));
    const std::string stem = "adam_roundtrip_model";
    save_params(p, stem);
    ModelParams q = load_params(stem);
    REQUIRE(q.count() == p.count());
    for (size_t i = 0; i < p.count(); ++i) {
        CHECK(q.name(i) == p.name(i));
        CHECK(q.tensor(i).shape == p.tensor(i).shape);
        CHECK(q.tensor(i).v == p.tensor(i).v);  // bit-exact
    }
    CHECK_THROWS_AS(load_params("no_such_model_stem"), IoError);
}
