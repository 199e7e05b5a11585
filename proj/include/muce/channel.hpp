#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "muce/rng.hpp"

namespace muce::sim {

using cplx = std::complex<double>;

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline double dist(Vec2 a, Vec2 b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 100.0, y1 = 100.0;
    bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    bool empty() const { return !(x1 > x0) || !(y1 > y0); }
};

struct SystemConfig {
    int64_t n_tx = 56;
    int64_t n_rx = 1;   // single-antenna users
    int64_t n_sc = 1;   // subcarriers carried per estimate
    int64_t pilot_len = 24;
    double wavelength = 0.12;
    Vec2 bs{-50.0, 50.0};  // base station sits outside the service area
    int64_t meas_dim() const { return n_rx * pilot_len * n_sc; }
    int64_t chan_dim() const { return n_rx * n_tx * n_sc; }
};

// Dense row-major complex matrix; small enough that nothing fancier is needed.
struct CMat {
    int64_t rows = 0, cols = 0;
    std::vector<cplx> v;
    CMat() = default;
    CMat(int64_t r, int64_t c) : rows(r), cols(c), v(size_t(r * c)) {}
    cplx& at(int64_t r, int64_t c) { return v[size_t(r * cols + c)]; }
    cplx at(int64_t r, int64_t c) const { return v[size_t(r * cols + c)]; }
};

// Column-major vectorization (stacked columns), the usual vec() convention.
std::vector<cplx> vec(const CMat& m);

// Complex <-> stacked-real bridge: nu(z) = [Re(z); Im(z)].
std::vector<double> nu(const std::vector<cplx>& z);
std::vector<cplx> nu_inv(const std::vector<double>& x);  // length must be even

struct Scatterer {
    Vec2 pos;
    cplx gain;
};

struct Scene {
    Rect area;
    std::vector<Scatterer> scatterers;
    uint64_t seed = 0;
};

struct ChannelSample {
    Vec2 p;
    CMat H;  // n_rx x (n_tx * n_sc)
};

struct PilotMatrix {
    CMat S;  // n_tx x (pilot_len * n_sc): the per-subcarrier pilots side by side
    uint64_t seed = 0;
};

struct MeasurementSample {
    Vec2 p;
    CMat Y;  // n_rx x (pilot_len * n_sc)
    double snr_db = 0.0;
    std::vector<double> y_real;  // [Re(vec Y); Im(vec Y)]
};

// Scatterer positions uniform over the area, base gains CN(0,1), all drawn
// from the stream derive_seed(seed, "scene") in the order
// (x, y, gain) per scatterer.
Scene generate_scene(const Rect& area, int64_t n_scatterers, uint64_t seed);

// Geometric single-bounce response at p:
//   h(p) = sum_c g_c * exp(-j*2*pi*(|s_c-bs| + |s_c-p|)/lambda) * (d0/|s_c-p|) * a(theta_c)
// with a(theta)_n = exp(-j*pi*n*sin theta) for a half-wavelength ULA whose
// broadside points along +x toward the service area (sin theta is the y
// component of the unit BS->scatterer direction), and d0 = 1 m.
// The response is frequency-flat: subcarrier blocks repeat the same h.
ChannelSample channel_at(const Scene& scene, const SystemConfig& sys, Vec2 p);

// Pilot entries i.i.d. CN(0,1) drawn row-major from derive_seed(seed, "pilot").
PilotMatrix generate_pilot(const SystemConfig& sys, uint64_t seed);

// Y = H*S + N per subcarrier, entry noise variance
// sigma^2 = |H*S|_F^2 / (n_rx * pilot_len * n_sc * 10^(snr_db/10));
// snr_db = +inf or a zero channel means no noise. Noise entries are drawn
// row-major from `noise`, one CN(0,1) per entry, scaled by sigma.
MeasurementSample measure(const ChannelSample& ch, const PilotMatrix& pilot,
                          const SystemConfig& sys, double snr_db, Rng& noise);

}  // namespace muce::sim
