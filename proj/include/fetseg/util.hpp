#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace fetseg {

// 9 significant digits, locale independent; shared by every CSV writer so
// outputs are byte reproducible.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Index-space parallel map; results land in a pre-sized slot per index, so the
// outcome does not depend on the thread count.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t nworkers = std::min<std::size_t>((std::size_t)threads, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nworkers);
    for (std::size_t w = 0; w < nworkers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += nworkers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace fetseg
