#include "s2fr/parallel.hpp"

#include <atomic>

#include <Eigen/Core>
#include <omp.h>

namespace s2fr {

namespace {
std::atomic<bool> g_deterministic{false};

void sync_eigen() { Eigen::setNbThreads(g_deterministic ? 1 : omp_get_max_threads()); }
}  // namespace

void set_threads(int threads) {
    omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
    sync_eigen();
}

int thread_count() { return omp_get_max_threads(); }

void set_deterministic(bool on) {
    g_deterministic = on;
    sync_eigen();
}

bool deterministic() { return g_deterministic; }

}  // namespace s2fr
