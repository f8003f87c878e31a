#pragma once

namespace s2fr {

/// Caps worker threads for OpenMP loops and matrix products (0 = hardware default).
void set_threads(int threads);
int thread_count();

/// When set, per-sample work is split across threads with each matrix product
/// single-threaded, so results do not depend on the thread count. Reductions
/// always run in a fixed order.
void set_deterministic(bool on);
bool deterministic();

}  // namespace s2fr
