#pragma once

#include <cstdint>
#include <functional>

namespace lintrain {

/// Worker count used by parallel_for: LINTRAIN_THREADS if set, else the
/// hardware concurrency. Always >= 1.
int worker_count();

/// Static range partition over [begin, end). Each worker owns a disjoint,
/// contiguous index block, so writes never overlap and every per-element
/// accumulation order matches the serial loop; results are identical for any
/// worker count.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

} // namespace lintrain
