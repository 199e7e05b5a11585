#include "muce/channel.hpp"

#include <cmath>

#include "muce/errors.hpp"

namespace muce::sim {

std::vector<cplx> vec(const CMat& m) {
    std::vector<cplx> out;
    out.reserve(size_t(m.rows * m.cols));
    for (int64_t c = 0; c < m.cols; ++c)
        for (int64_t r = 0; r < m.rows; ++r) out.push_back(m.at(r, c));
    return out;
}

std::vector<double> nu(const std::vector<cplx>& z) {
    std::vector<double> out(2 * z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        out[i] = z[i].real();
        out[z.size() + i] = z[i].imag();
    }
    return out;
}

std::vector<cplx> nu_inv(const std::vector<double>& x) {
    if (x.size() % 2 != 0)
        throw DimensionError("nu_inv: length must be even, got " + std::to_string(x.size()));
    const size_t n = x.size() / 2;
    std::vector<cplx> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = {x[i], x[n + i]};
    return out;
}

Scene generate_scene(const Rect& area, int64_t n_scatterers, uint64_t seed) {
    if (area.empty()) throw ConfigError("generate_scene: empty area");
    if (n_scatterers < 1) throw ConfigError("generate_scene: need at least one scatterer");
    Scene scene;
    scene.area = area;
    scene.seed = seed;
    Rng rng = Rng::derive(seed, "scene");
    scene.scatterers.reserve(size_t(n_scatterers));
    for (int64_t i = 0; i < n_scatterers; ++i) {
        Scatterer s;
        s.pos.x = rng.uniform(area.x0, area.x1);
        s.pos.y = rng.uniform(area.y0, area.y1);
        s.gain = rng.cnormal();
        scene.scatterers.push_back(s);
    }
    return scene;
}

ChannelSample channel_at(const Scene& scene, const SystemConfig& sys, Vec2 p) {
    if (!scene.area.contains(p))
        throw DomainError("channel_at: position (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") outside the scene area");
    if (sys.n_rx != 1) throw ConfigError("channel_at: the scene model covers single-antenna users");
    constexpr double d0 = 1.0;
    const double two_pi = 2.0 * M_PI;

    std::vector<cplx> h(size_t(sys.n_tx), cplx{0.0, 0.0});
    for (const Scatterer& sc : scene.scatterers) {
        const double d_bs = dist(sc.pos, sys.bs);
        const double d_u = std::max(dist(sc.pos, p), 1e-6);  // guard a user sitting on a scatterer
        const double sin_theta = (sc.pos.y - sys.bs.y) / d_bs;
        const double phase = -two_pi * (d_bs + d_u) / sys.wavelength;
        const cplx alpha = sc.gain * std::polar(d0 / d_u, phase);
        for (int64_t n = 0; n < sys.n_tx; ++n)
            h[size_t(n)] += alpha * std::polar(1.0, -M_PI * double(n) * sin_theta);
    }

    ChannelSample out;
    out.p = p;
    out.H = CMat(sys.n_rx, sys.n_tx * sys.n_sc);
    for (int64_t s = 0; s < sys.n_sc; ++s)
        for (int64_t n = 0; n < sys.n_tx; ++n) out.H.at(0, s * sys.n_tx + n) = h[size_t(n)];
    return out;
}

PilotMatrix generate_pilot(const SystemConfig& sys, uint64_t seed) {
    PilotMatrix pm;
    pm.seed = seed;
    pm.S = CMat(sys.n_tx, sys.pilot_len * sys.n_sc);
    Rng rng = Rng::derive(seed, "pilot");
    for (cplx& e : pm.S.v) e = rng.cnormal();
    return pm;
}

MeasurementSample measure(const ChannelSample& ch, const PilotMatrix& pilot,
                          const SystemConfig& sys, double snr_db, Rng& noise) {
    const int64_t L = sys.pilot_len;
    if (ch.H.rows != sys.n_rx || ch.H.cols != sys.n_tx * sys.n_sc)
        throw DimensionError("measure: channel shape does not match the system config");
    if (pilot.S.rows != sys.n_tx || pilot.S.cols != L * sys.n_sc)
        throw DimensionError("measure: pilot shape does not match the system config");

    MeasurementSample out;
    out.p = ch.p;
    out.snr_db = snr_db;
    out.Y = CMat(sys.n_rx, L * sys.n_sc);
    double signal_power = 0.0;
    for (int64_t s = 0; s < sys.n_sc; ++s)
        for (int64_t r = 0; r < sys.n_rx; ++r)
            for (int64_t l = 0; l < L; ++l) {
                cplx acc{0.0, 0.0};
                for (int64_t t = 0; t < sys.n_tx; ++t)
                    acc += ch.H.at(r, s * sys.n_tx + t) * pilot.S.at(t, s * L + l);
                out.Y.at(r, s * L + l) = acc;
                signal_power += std::norm(acc);
            }

    const double denom = double(sys.n_rx * L * sys.n_sc);
    const double sigma2 =
        std::isinf(snr_db) ? 0.0 : signal_power / (denom * std::pow(10.0, snr_db / 10.0));
    if (sigma2 > 0.0) {
        const double sigma = std::sqrt(sigma2);
        for (cplx& e : out.Y.v) e += sigma * noise.cnormal();  // row-major draw order
    }
    out.y_real = nu(vec(out.Y));
    return out;
}

}  // namespace muce::sim
