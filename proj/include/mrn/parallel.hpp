#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mrn {

int worker_threads();

// body(l) for l in [0, L) on worker_threads() threads; the first exception is rethrown.
template <class F>
void parallel_for(int L, F&& body)
{
    const int T = std::max(1, std::min(worker_threads(), L));
    if (T == 1) {
        for (int l = 0; l < L; ++l) body(l);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mtx;
    std::vector<std::thread> pool;
    for (int w = 0; w < T; ++w)
        pool.emplace_back([&] {
            while (true) {
                const int l = next.fetch_add(1);
                if (l >= L) return;
                try {
                    body(l);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mtx);
                    if (!err) err = std::current_exception();
                    next = L;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace mrn
