#pragma once

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sde {

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Run f(i) for i in [0, n). The parallel path and the serial path execute the
// same per-index work, so any result written by index is identical between
// them; tests compare the two directly.
template <class F>
void parallel_for(int n, bool parallel, F&& f) {
#ifdef _OPENMP
    if (parallel && n > 1) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
#else
    (void)parallel;
#endif
    for (int i = 0; i < n; ++i) f(i);
}

// Deterministic blocked sum reduction. Items are grouped into fixed-size
// blocks; each block partial is accumulated in item order and block partials
// are folded in block order. The summation tree depends only on (n_items,
// block_size), never on the thread count, so serial and parallel execution
// produce bit-identical sums.
//
// item(i, acc) must add item i's contribution into acc (a zeroed vector of
// length vec_len).
template <class ItemFn>
void blocked_accumulate(int n_items, int vec_len, int block_size, bool parallel,
                        std::vector<double>& out, ItemFn&& item) {
    const int n_blocks = (n_items + block_size - 1) / block_size;
    std::vector<std::vector<double>> partials(n_blocks);
    parallel_for(n_blocks, parallel, [&](int b) {
        std::vector<double> acc(vec_len, 0.0);
        const int lo = b * block_size;
        const int hi = std::min(n_items, lo + block_size);
        for (int i = lo; i < hi; ++i) item(i, acc);
        partials[b] = std::move(acc);
    });
    out.assign(vec_len, 0.0);
    for (int b = 0; b < n_blocks; ++b)
        for (int j = 0; j < vec_len; ++j) out[j] += partials[b][j];
}

}  // namespace sde
