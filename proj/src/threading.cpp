#include "fewt/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>

namespace fewt {

int worker_count(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* cap = std::getenv("FEWT_THREADS")) {
        int c = std::atoi(cap);
        if (c >= 1) n = std::min(n, c);
    }
    return n;
}

void parallel_blocks(std::size_t n, std::size_t block_size, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t, int)>& fn) {
    if (n == 0) return;
    if (block_size == 0) block_size = 1;
    std::size_t n_blocks = (n + block_size - 1) / block_size;
    int workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n_blocks);

    if (workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            fn(b, b * block_size, std::min(n, (b + 1) * block_size), 0);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (;;) {
                    std::size_t b = next.fetch_add(1);
                    if (b >= n_blocks) return;
                    fn(b, b * block_size, std::min(n, (b + 1) * block_size), w);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace fewt
