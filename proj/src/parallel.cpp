#include "sdelab/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "sdelab/errors.hpp"

namespace sdelab {

namespace {

std::atomic<std::size_t> g_override{0};

}  // namespace

std::size_t worker_count() {
    if (const std::size_t o = g_override.load(); o > 0) return o;
    if (const char* env = std::getenv("SDELAB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void set_worker_count(std::size_t workers) { g_override.store(workers); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex guard;
    std::exception_ptr error;
    std::size_t error_index = count;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(guard);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                next.store(count);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t k = 1; k < workers; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

void for_each_replication(std::uint64_t seed, std::size_t count,
                          const std::function<void(std::size_t)>& body) {
    parallel_for(count, [&](std::size_t r) {
        const auto where = [&] {
            return " (replication " + std::to_string(r) + ", seed " + std::to_string(seed) + ")";
        };
        try {
            body(r);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.what() + where(), e.step());
        } catch (const NonTerminationError& e) {
            throw NonTerminationError(e.what() + where());
        }
    });
}

double pairwise_sum(std::span<const double> values) noexcept {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

}  // namespace sdelab
