#pragma once

namespace s2fr {

// Half-sample symmetric extension: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
// Valid for any integer i, including offsets larger than n.
constexpr int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

}  // namespace s2fr
