#include "muce/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace muce::num {

namespace {

int resolve_auto() {
    if (const char* env = std::getenv("MUCE_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return int(std::clamp<unsigned>(hw == 0 ? 1 : hw, 1, 8));
}

int g_threads = 0;

}  // namespace

void set_num_threads(int n) { g_threads = n < 0 ? 0 : n; }

int num_threads() { return g_threads == 0 ? resolve_auto() : g_threads; }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    int workers = num_threads();
    if (workers <= 1 || n < 2) {
        if (n > 0) fn(0, n);
        return;
    }
    int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int64_t lo = 0; lo < n; lo += chunk) {
        int64_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace muce::num
