#include "aronsson/util.hpp"

#include <cstdio>
#include <cstdlib>

namespace aronsson {

int thread_count() {
    static const int n = [] {
        const char* env = std::getenv("ARONSSON_THREADS");
        if (!env) return 1;
        const int v = std::atoi(env);
        return v >= 1 ? v : 1;
    }();
    return n;
}

void parallel_chunks(int n, const std::function<void(int, int, int)>& body) {
    const int workers = std::min(thread_count(), std::max(1, n));
    if (workers == 1) {
        body(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, w, lo, hi);
    }
    for (auto& t : pool) t.join();
}

std::string fnv1a_hex(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace aronsson
