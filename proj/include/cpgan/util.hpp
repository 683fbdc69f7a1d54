#pragma once

#include <cstdarg>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace cpgan {

// All library failures surface as cpgan::Error with a one-line message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] void fail(const char* fmt, ...);
std::string strformat(const char* fmt, ...);

void check(bool cond, const char* fmt, ...);

// ---------------------------------------------------------------------------
// Logging. Level comes from the CPGAN_LOG environment variable:
// "quiet" (errors only), "info" (default), "debug".
// ---------------------------------------------------------------------------

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level();
void log_info(const char* fmt, ...);
void log_debug(const char* fmt, ...);
void log_warn(const char* fmt, ...);

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 gives a portable bit stream; uniform and
// normal draws are derived from it without libc distribution objects so the
// same seed produces the same values on every platform.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t x);

// Stable per-item seed derivation (dataset index, iteration, ...).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x9e3779b97f4a7c15ull));
}

class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Box-Muller; consumes two uniforms per pair of normals.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n);

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Thread pool with deterministic chunked parallel-for. Work is always split
// into a fixed number of chunks independent of the worker count, and any
// cross-chunk reduction is the caller's responsibility (in chunk order), so
// results are bit-identical no matter how many threads execute.
// ---------------------------------------------------------------------------

class ThreadPool {
public:
    static ThreadPool& instance();
    // 0 = auto (hardware concurrency). Takes effect for subsequent calls.
    static void set_threads(int n);
    static int threads();

    // Runs fn(chunk) for chunk in [0, chunks); blocks until all complete.
    void run_chunks(int chunks, const std::function<void(int)>& fn);

private:
    ThreadPool();
    ~ThreadPool();
    struct Impl;
    Impl* impl_;
};

// Splits [0, n) into at most `chunks` contiguous ranges and runs
// fn(begin, end) for each on the pool. Deterministic partition.
void parallel_ranges(int64_t n, int chunks, const std::function<void(int64_t, int64_t)>& fn);

// Fixed chunk count used by the numeric kernels. Keeping it constant (rather
// than tied to the machine) makes results independent of the thread count.
inline constexpr int kNumericChunks = 16;

// ---------------------------------------------------------------------------
// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// Backed by BLAS; large products are split row-wise into kNumericChunks
// blocks executed on the pool (bit-exact for any thread count).
// ---------------------------------------------------------------------------

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

}  // namespace cpgan
