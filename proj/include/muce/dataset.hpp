#pragma once

#include <string>

#include "muce/channel.hpp"

namespace muce::sim {

// Structure-of-arrays sample store. Measurements are kept both as complex
// matrices (for the compressed-sensing path) and as their stacked-real images
// (network inputs); the real image is derived, never persisted.
struct Dataset {
    bool labeled = false;  // ground-truth channels present?
    int64_t count = 0;
    SystemConfig sys;
    double snr_db = 0.0;
    uint64_t seed = 0;        // root seed the draws flowed from
    uint64_t pilot_seed = 0;  // pilot shared by every sample
    std::vector<double> positions;  // count x 2
    std::vector<cplx> Y;            // count x meas_dim, row-major per sample
    std::vector<cplx> H;            // labeled only: count x chan_dim
    std::vector<double> y_real;     // count x 2*meas_dim

    Vec2 pos(int64_t i) const { return {positions[size_t(2 * i)], positions[size_t(2 * i + 1)]}; }
    const double* y_row(int64_t i) const { return y_real.data() + i * 2 * sys.meas_dim(); }
    const cplx* Y_row(int64_t i) const { return Y.data() + i * sys.meas_dim(); }
    const cplx* H_row(int64_t i) const { return H.data() + i * sys.chan_dim(); }
};

struct DatasetSizes {
    int64_t contrastive = 0;
    int64_t downstream = 0;
    int64_t test = 0;
};

struct DatasetBundle {
    Dataset contrastive;  // unlabeled
    Dataset downstream;   // labeled
    Dataset test;         // labeled
    PilotMatrix pilot;
};

// Positions come from derive_seed(seed, "data/positions") as (x, y) pairs in
// one run of contrastive+downstream+test draws; sample i's noise comes from
// its own stream derive_seed(seed, "data/noise", i) so generation order never
// matters. The pilot comes from derive_seed-ing the same root with "pilot".
DatasetBundle build_datasets(const Scene& scene, const SystemConfig& sys, DatasetSizes sizes,
                             double snr_db, uint64_t seed);

// Re-draw every measurement of a labeled dataset at a new SNR (fresh noise
// streams under `tag`); channels, positions, and the pilot stay fixed.
Dataset remeasure(const Dataset& ds, const PilotMatrix& pilot, double snr_db, uint64_t seed,
                  const std::string& tag);

// <stem>.meta (text) + <stem>.bin (LE float64 payload; complex interleaved
// re/im; order: positions, measurements, channels). Round-trips bit-exactly.
void save_dataset(const Dataset& ds, const std::string& stem);
Dataset load_dataset(const std::string& stem);

}  // namespace muce::sim
