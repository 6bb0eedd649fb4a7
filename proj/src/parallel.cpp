#include "stvedit/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace stvedit {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) {
    if (n <= 0)
        n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1)
        n = 1;
    g_threads.store(n);
}

int num_threads() { return g_threads.load(); }

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(num_threads(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    auto body = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n || failed.load())
                return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true))
                    err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w)
        pool.emplace_back(body);
    body();
    for (auto& t : pool)
        t.join();
    if (failed.load() && err)
        std::rethrow_exception(err);
}

} // namespace stvedit
