#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sdelab {

/// Worker count: SDELAB_THREADS if set and positive, else the hardware concurrency.
std::size_t worker_count();

/// Overrides SDELAB_THREADS for this process; 0 restores the default.
void set_worker_count(std::size_t workers);

/**
 * Calls body(i) for i in [0, count) on up to worker_count() threads. Work
 * is handed out by index; the first exception (lowest index) is rethrown
 * after all workers finish.
 */
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/**
 * parallel_for over Monte Carlo replications drawn from `seed`. Divergence and
 * non-termination errors are rethrown with the replication index and seed
 * appended, so the failing path can be replayed.
 */
void for_each_replication(std::uint64_t seed, std::size_t count,
                          const std::function<void(std::size_t)>& body);

/// Pairwise summation in a fixed order, independent of how values were produced.
double pairwise_sum(std::span<const double> values) noexcept;

}  // namespace sdelab
