#include "lintrain/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace lintrain {

int worker_count() {
    static const int count = [] {
        if (const char* env = std::getenv("LINTRAIN_THREADS")) {
            const int n = std::atoi(env);
            if (n >= 1) return n;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return count;
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
    const std::int64_t total = end - begin;
    if (total <= 0) return;
    const int workers = static_cast<int>(
        std::min<std::int64_t>(worker_count(), total));
    if (workers <= 1) {
        body(begin, end);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (total + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = begin + w * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : threads) t.join();
}

} // namespace lintrain
