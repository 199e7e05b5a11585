#include "muce/dataset.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "muce/errors.hpp"
#include "muce/io.hpp"

namespace muce::sim {

namespace {

Dataset make_empty(bool labeled, const SystemConfig& sys, double snr_db, uint64_t seed,
                   uint64_t pilot_seed) {
    Dataset ds;
    ds.labeled = labeled;
    ds.sys = sys;
    ds.snr_db = snr_db;
    ds.seed = seed;
    ds.pilot_seed = pilot_seed;
    return ds;
}

void push_sample(Dataset& ds, const ChannelSample& ch, const MeasurementSample& ms) {
    ds.positions.push_back(ms.p.x);
    ds.positions.push_back(ms.p.y);
    ds.Y.insert(ds.Y.end(), ms.Y.v.begin(), ms.Y.v.end());
    ds.y_real.insert(ds.y_real.end(), ms.y_real.begin(), ms.y_real.end());
    if (ds.labeled) ds.H.insert(ds.H.end(), ch.H.v.begin(), ch.H.v.end());
    ds.count++;
}

}  // namespace

DatasetBundle build_datasets(const Scene& scene, const SystemConfig& sys, DatasetSizes sizes,
                             double snr_db, uint64_t seed) {
    if (sizes.contrastive < 1 || sizes.downstream < 1 || sizes.test < 1)
        throw ConfigError("build_datasets: all three sizes must be at least 1");

    DatasetBundle b;
    b.pilot = generate_pilot(sys, derive_seed(seed, "pilot"));
    b.contrastive = make_empty(false, sys, snr_db, seed, b.pilot.seed);
    b.downstream = make_empty(true, sys, snr_db, seed, b.pilot.seed);
    b.test = make_empty(true, sys, snr_db, seed, b.pilot.seed);

    Rng pos_rng = Rng::derive(seed, "data/positions");
    const int64_t total = sizes.contrastive + sizes.downstream + sizes.test;
    for (int64_t i = 0; i < total; ++i) {
        Vec2 p;
        p.x = pos_rng.uniform(scene.area.x0, scene.area.x1);
        p.y = pos_rng.uniform(scene.area.y0, scene.area.y1);
        ChannelSample ch = channel_at(scene, sys, p);
        Rng noise = Rng::derive(seed, "data/noise", uint64_t(i));
        MeasurementSample ms = measure(ch, b.pilot, sys, snr_db, noise);
        Dataset& target = i < sizes.contrastive                     ? b.contrastive
                          : i < sizes.contrastive + sizes.downstream ? b.downstream
                                                                     : b.test;
        push_sample(target, ch, ms);
    }
    return b;
}

Dataset remeasure(const Dataset& ds, const PilotMatrix& pilot, double snr_db, uint64_t seed,
                  const std::string& tag) {
    if (!ds.labeled) throw UsageError("remeasure: needs a labeled dataset (stored channels)");
    Dataset out = ds;
    out.snr_db = snr_db;
    out.Y.clear();
    out.y_real.clear();
    for (int64_t i = 0; i < ds.count; ++i) {
        ChannelSample ch;
        ch.p = ds.pos(i);
        ch.H = CMat(ds.sys.n_rx, ds.sys.chan_dim() / ds.sys.n_rx);
        std::copy_n(ds.H_row(i), size_t(ds.sys.chan_dim()), ch.H.v.begin());
        Rng noise = Rng::derive(seed, tag, uint64_t(i));
        MeasurementSample ms = measure(ch, pilot, ds.sys, snr_db, noise);
        out.Y.insert(out.Y.end(), ms.Y.v.begin(), ms.Y.v.end());
        out.y_real.insert(out.y_real.end(), ms.y_real.begin(), ms.y_real.end());
    }
    return out;
}

namespace {

void append_doubles(std::string& payload, const double* p, size_t n) {
    const size_t off = payload.size();
    payload.resize(off + n * sizeof(double));
    std::memcpy(payload.data() + off, p, n * sizeof(double));
}

void append_cplx(std::string& payload, const std::vector<cplx>& z) {
    for (const cplx& e : z) {
        const double re = e.real(), im = e.imag();
        append_doubles(payload, &re, 1);
        append_doubles(payload, &im, 1);
    }
}

std::string fmt_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& stem) {
    std::string payload;
    append_doubles(payload, ds.positions.data(), ds.positions.size());
    append_cplx(payload, ds.Y);
    if (ds.labeled) append_cplx(payload, ds.H);
    const uint64_t hash = fnv1a64(payload.data(), payload.size());

    std::ostringstream meta;
    meta << "muce_dataset 1\n";
    meta << "kind " << (ds.labeled ? "labeled" : "contrastive") << "\n";
    meta << "count " << ds.count << "\n";
    meta << "n_rx " << ds.sys.n_rx << "\n";
    meta << "n_tx " << ds.sys.n_tx << "\n";
    meta << "n_sc " << ds.sys.n_sc << "\n";
    meta << "pilot_len " << ds.sys.pilot_len << "\n";
    meta << "wavelength " << fmt_double(ds.sys.wavelength) << "\n";
    meta << "bs " << fmt_double(ds.sys.bs.x) << " " << fmt_double(ds.sys.bs.y) << "\n";
    meta << "snr_db " << fmt_double(ds.snr_db) << "\n";
    meta << "seed " << ds.seed << "\n";
    meta << "pilot_seed " << ds.pilot_seed << "\n";
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)hash);
    meta << "payload_fnv1a64 " << hex << "\n";

    io::write_bytes(stem + ".meta", meta.str());
    io::write_bytes(stem + ".bin", payload);
}

Dataset load_dataset(const std::string& stem) {
    std::istringstream mf(io::read_bytes(stem + ".meta"));
    std::string word;
    int version = 0;
    if (!(mf >> word >> version) || word != "muce_dataset" || version != 1)
        throw IoError(stem + ".meta", "not a dataset file (bad magic)");

    Dataset ds;
    std::string kind, snr, wl, bsx, bsy;
    uint64_t expect_hash = 0;
    bool have_hash = false;
    std::string key;
    while (mf >> key) {
        if (key == "kind") mf >> kind;
        else if (key == "count") mf >> ds.count;
        else if (key == "n_rx") mf >> ds.sys.n_rx;
        else if (key == "n_tx") mf >> ds.sys.n_tx;
        else if (key == "n_sc") mf >> ds.sys.n_sc;
        else if (key == "pilot_len") mf >> ds.sys.pilot_len;
        else if (key == "wavelength") { mf >> wl; ds.sys.wavelength = parse_double(wl); }
        else if (key == "bs") { mf >> bsx >> bsy; ds.sys.bs = {parse_double(bsx), parse_double(bsy)}; }
        else if (key == "snr_db") { mf >> snr; ds.snr_db = parse_double(snr); }
        else if (key == "seed") mf >> ds.seed;
        else if (key == "pilot_seed") mf >> ds.pilot_seed;
        else if (key == "payload_fnv1a64") {
            std::string hex;
            mf >> hex;
            if (hex.size() != 16) throw IoError(stem + ".meta", "malformed payload hash");
            expect_hash = std::stoull(hex, nullptr, 16);
            have_hash = true;
        } else {
            throw IoError(stem + ".meta", "unknown key: " + key);
        }
        if (!mf && !mf.eof()) throw IoError(stem + ".meta", "malformed value for key " + key);
    }
    if (kind != "labeled" && kind != "contrastive")
        throw IoError(stem + ".meta", "missing or bad kind");
    if (!have_hash) throw IoError(stem + ".meta", "missing payload hash");
    if (ds.count < 1) throw IoError(stem + ".meta", "bad sample count");
    ds.labeled = (kind == "labeled");

    const std::string payload = io::read_bytes(stem + ".bin");
    if (fnv1a64(payload.data(), payload.size()) != expect_hash)
        throw IoError(stem + ".bin", "payload hash mismatch (corrupt file)");
    const int64_t md = ds.sys.meas_dim(), cd = ds.sys.chan_dim();
    const size_t want = sizeof(double) * size_t(ds.count) *
                        (2 + 2 * size_t(md) + (ds.labeled ? 2 * size_t(cd) : 0));
    if (payload.size() != want) throw IoError(stem + ".bin", "payload size does not match header");

    const double* p = reinterpret_cast<const double*>(payload.data());
    ds.positions.assign(p, p + 2 * ds.count);
    p += 2 * ds.count;
    ds.Y.resize(size_t(ds.count * md));
    for (cplx& e : ds.Y) {
        e = {p[0], p[1]};
        p += 2;
    }
    if (ds.labeled) {
        ds.H.resize(size_t(ds.count * cd));
        for (cplx& e : ds.H) {
            e = {p[0], p[1]};
            p += 2;
        }
    }

    ds.y_real.reserve(size_t(ds.count * 2 * md));
    for (int64_t i = 0; i < ds.count; ++i) {
        CMat Y(ds.sys.n_rx, md / ds.sys.n_rx);
        std::copy_n(ds.Y_row(i), size_t(md), Y.v.begin());
        std::vector<double> yr = nu(vec(Y));
        ds.y_real.insert(ds.y_real.end(), yr.begin(), yr.end());
    }
    return ds;
}

}  // namespace muce::sim
