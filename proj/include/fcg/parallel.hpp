#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace fcg {

// Runs fn(i) for i in [0, n) on up to `limit` threads. Returns one
// exception_ptr per index (null on success); callers decide what a failure means.
template <class Fn>
std::vector<std::exception_ptr> parallel_for_index(std::size_t n, std::size_t limit, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min(std::max<std::size_t>(limit, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
        return errors;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run(i);
        });
    }
    for (auto& t : pool) t.join();
    return errors;
}

}  // namespace fcg
