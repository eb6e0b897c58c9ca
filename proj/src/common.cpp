#include "perk/common.hpp"

#include <atomic>
#include <mutex>
#include <thread>

namespace perk {

namespace {
int g_threads = 0;
}

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int threads() { return g_threads == 0 ? hardware_threads() : g_threads; }

void parallel_chunks(Index total, Index chunk_size,
                     const std::function<void(Index, Index, Index)>& fn) {
    require(chunk_size > 0, "parallel_chunks: chunk_size must be positive");
    if (total <= 0) return;
    const Index n_chunks = (total + chunk_size - 1) / chunk_size;
    const int n_workers = std::min<Index>(threads(), n_chunks);
    if (n_workers <= 1) {
        for (Index c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(total, (c + 1) * chunk_size));
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const Index c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                fn(c, c * chunk_size, std::min(total, (c + 1) * chunk_size));
            } catch (...) {
                std::scoped_lock lk(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace perk
