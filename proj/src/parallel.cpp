#include "alens/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace alens {

std::size_t thread_budget() {
    std::size_t budget = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ALENS_THREADS")) {
        try {
            const auto cap = std::stoul(env);
            if (cap >= 1) {
                budget = std::min<std::size_t>(budget, cap);
            }
        } catch (const std::exception&) {
            // Unparseable values leave the default in place.
        }
    }
    return budget;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const auto workers = std::min(thread_budget(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(count);
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t + 1 < workers; ++t) {
        pool.emplace_back(run);
    }
    run();
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace alens
