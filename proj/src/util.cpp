#include "cpgan/util.hpp"

#include <cblas.h>

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

// Present when linking OpenBLAS; used to keep BLAS single-threaded inside our
// own chunked dispatch.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace cpgan {

static std::string vformat(const char* fmt, va_list ap) {
    va_list ap2;
    va_copy(ap2, ap);
    int n = std::vsnprintf(nullptr, 0, fmt, ap);
    std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
    if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, ap2);
    va_end(ap2);
    return out;
}

std::string strformat(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    std::string s = vformat(fmt, ap);
    va_end(ap);
    return s;
}

void fail(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    std::string s = vformat(fmt, ap);
    va_end(ap);
    throw Error(s);
}

void check(bool cond, const char* fmt, ...) {
    if (cond) return;
    va_list ap;
    va_start(ap, fmt);
    std::string s = vformat(fmt, ap);
    va_end(ap);
    throw Error(s);
}

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("CPGAN_LOG");
        if (!env) return LogLevel::Info;
        if (std::strcmp(env, "quiet") == 0) return LogLevel::Quiet;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

void log_info(const char* fmt, ...) {
    if (log_level() < LogLevel::Info) return;
    va_list ap;
    va_start(ap, fmt);
    std::string s = vformat(fmt, ap);
    va_end(ap);
    std::fprintf(stderr, "[cpgan] %s\n", s.c_str());
}

void log_debug(const char* fmt, ...) {
    if (log_level() < LogLevel::Debug) return;
    va_list ap;
    va_start(ap, fmt);
    std::string s = vformat(fmt, ap);
    va_end(ap);
    std::fprintf(stderr, "[cpgan:debug] %s\n", s.c_str());
}

void log_warn(const char* fmt, ...) {
    if (log_level() < LogLevel::Info) return;
    va_list ap;
    va_start(ap, fmt);
    std::string s = vformat(fmt, ap);
    va_end(ap);
    std::fprintf(stderr, "[cpgan:warn] %s\n", s.c_str());
}

// ---------------------------------------------------------------------------
// RNG
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed) {
    // xoshiro256** seeded through splitmix64.
    uint64_t x = seed;
    for (auto& s : s_) {
        x = splitmix64(x);
        s = x;
    }
}

static inline uint64_t rotl64(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t Rng::next_u64() {
    uint64_t* s = s_;
    const uint64_t result = rotl64(s[1] * 5, 7) * 9;
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl64(s[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Avoid log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) return 0;
    // Rejection sampling for an unbiased draw.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

// ---------------------------------------------------------------------------
// Thread pool
// ---------------------------------------------------------------------------

struct ThreadPool::Impl {
    std::mutex mu;
    std::condition_variable cv_work;
    std::condition_variable cv_done;
    std::vector<std::thread> workers;
    const std::function<void(int)>* job = nullptr;
    int job_chunks = 0;
    std::atomic<int> next_chunk{0};
    int pending = 0;
    uint64_t generation = 0;
    bool stop = false;

    void worker_loop() {
        uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* fn = nullptr;
            int chunks = 0;
            {
                std::unique_lock<std::mutex> lk(mu);
                cv_work.wait(lk, [&] { return stop || generation != seen; });
                if (stop) return;
                seen = generation;
                fn = job;
                chunks = job_chunks;
            }
            for (;;) {
                int c = next_chunk.fetch_add(1);
                if (c >= chunks) break;
                (*fn)(c);
            }
            {
                std::lock_guard<std::mutex> lk(mu);
                if (--pending == 0) cv_done.notify_all();
            }
        }
    }
};

static std::atomic<int> g_thread_count{0};  // 0 = auto

ThreadPool::ThreadPool() : impl_(new Impl) {
    int n = g_thread_count.load();
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
    }
    if (openblas_set_num_threads) openblas_set_num_threads(1);
    // The calling thread participates too, so spawn n-1 workers.
    for (int i = 0; i < n - 1; ++i) {
        impl_->workers.emplace_back([this] { impl_->worker_loop(); });
    }
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lk(impl_->mu);
        impl_->stop = true;
    }
    impl_->cv_work.notify_all();
    for (auto& t : impl_->workers) t.join();
    delete impl_;
}

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

void ThreadPool::set_threads(int n) { g_thread_count.store(n); }

int ThreadPool::threads() {
    int n = g_thread_count.load();
    if (n <= 0) {
        n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
    }
    return n;
}

void ThreadPool::run_chunks(int chunks, const std::function<void(int)>& fn) {
    if (chunks <= 0) return;
    if (chunks == 1 || impl_->workers.empty()) {
        for (int c = 0; c < chunks; ++c) fn(c);
        return;
    }
    {
        std::lock_guard<std::mutex> lk(impl_->mu);
        impl_->job = &fn;
        impl_->job_chunks = chunks;
        impl_->next_chunk.store(0);
        impl_->pending = static_cast<int>(impl_->workers.size());
        ++impl_->generation;
    }
    impl_->cv_work.notify_all();
    // Caller participates.
    for (;;) {
        int c = impl_->next_chunk.fetch_add(1);
        if (c >= chunks) break;
        fn(c);
    }
    std::unique_lock<std::mutex> lk(impl_->mu);
    impl_->cv_done.wait(lk, [&] { return impl_->pending == 0; });
    impl_->job = nullptr;
}

void parallel_ranges(int64_t n, int chunks, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int c = static_cast<int>(std::min<int64_t>(chunks, n));
    const int64_t per = (n + c - 1) / c;
    ThreadPool::instance().run_chunks(c, [&](int idx) {
        const int64_t b = idx * per;
        const int64_t e = std::min<int64_t>(n, b + per);
        if (b < e) fn(b, e);
    });
}

// ---------------------------------------------------------------------------
// GEMM
// ---------------------------------------------------------------------------

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc) {
    if (m == 0 || n == 0) return;
    const CBLAS_TRANSPOSE ta = trans_a ? CblasTrans : CblasNoTrans;
    const CBLAS_TRANSPOSE tb = trans_b ? CblasTrans : CblasNoTrans;
    const double flops = 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
    if (flops < 4.0e6 || m < 2 * kNumericChunks) {
        cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                    static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                    beta, c, static_cast<int>(ldc));
        return;
    }
    // Split output rows into a fixed number of blocks; each block is one
    // sequential BLAS call, so the result does not depend on thread count.
    parallel_ranges(m, kNumericChunks, [&](int64_t r0, int64_t r1) {
        const double* ablk = trans_a ? a + r0 : a + r0 * lda;
        cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(r1 - r0), static_cast<int>(n),
                    static_cast<int>(k), alpha, ablk, static_cast<int>(lda), b,
                    static_cast<int>(ldb), beta, c + r0 * ldc, static_cast<int>(ldc));
    });
}

}  // namespace cpgan
