#include "rdsg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace rdsg {

namespace {
std::atomic<int> g_workers{0};
}

int default_workers()
{
    if (const char* env = std::getenv("RDSG_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 4u));
}

void set_workers(int n) { g_workers = n > 0 ? n : 0; }

int workers()
{
    const int n = g_workers.load();
    return n > 0 ? n : default_workers();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& body,
                  int chunks)
{
    if (n == 0) return;
    const int nw = workers();
    if (chunks <= 0) chunks = nw;
    chunks = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(chunks), n));
    if (chunks == 1 || nw == 1) {
        for (int c = 0; c < chunks; ++c)
            body(n * c / chunks, n * (c + 1) / chunks, c);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&]() {
        for (int c = next++; c < chunks; c = next++) {
            try {
                body(n * c / chunks, n * (c + 1) / chunks, c);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(nw, chunks);
    for (int w = 1; w < nthreads; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace rdsg
