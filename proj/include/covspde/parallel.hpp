#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>

namespace covspde {

/// Execution variant for the data-parallel kernels. Serial is the reference;
/// Parallel must produce bit-identical output (every task writes its own slot,
/// reductions happen afterwards in index order).
enum class Exec { Serial, Parallel };

/// Worker count for Parallel execution (COVSPDE_WORKERS, else OpenMP default).
int workers();
void set_workers(int w);
Exec default_exec();

namespace detail {
void omp_for(std::int64_t n, void (*body)(void*, std::int64_t), void* ctx);
}

template <class F>
void for_each_index(Exec ex, std::size_t n, F&& f) {
  if (ex == Exec::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  struct Ctx {
    F* f;
    std::mutex mu;
    std::exception_ptr err;
    std::int64_t err_index = std::numeric_limits<std::int64_t>::max();
  } ctx{&f, {}, {}};
  detail::omp_for(
      static_cast<std::int64_t>(n),
      [](void* p, std::int64_t i) {
        auto* c = static_cast<Ctx*>(p);
        try {
          (*c->f)(static_cast<std::size_t>(i));
        } catch (...) {
          std::lock_guard<std::mutex> lock(c->mu);
          // Keep the lowest-index failure so the surfaced error is deterministic.
          if (i < c->err_index) {
            c->err_index = i;
            c->err = std::current_exception();
          }
        }
      },
      &ctx);
  if (ctx.err) std::rethrow_exception(ctx.err);
}

/// Runs f(lo, hi) over consecutive blocks of [0, n).
template <class F>
void for_each_block(Exec ex, std::size_t n, std::size_t block, F&& f) {
  if (block == 0) block = 1;
  const std::size_t nb = (n + block - 1) / block;
  for_each_index(ex, nb, [&](std::size_t b) {
    const std::size_t lo = b * block;
    f(lo, lo + block < n ? lo + block : n);
  });
}

}  // namespace covspde
