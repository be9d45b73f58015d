#include "covspde/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace covspde {

namespace {

int initial_workers() {
  if (const char* env = std::getenv("COVSPDE_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return omp_get_max_threads();
}

std::atomic<int>& worker_slot() {
  static std::atomic<int> w{initial_workers()};
  return w;
}

}  // namespace

int workers() { return worker_slot().load(); }

void set_workers(int w) { worker_slot().store(w > 0 ? w : initial_workers()); }

Exec default_exec() { return Exec::Parallel; }

namespace detail {

void omp_for(std::int64_t n, void (*body)(void*, std::int64_t), void* ctx) {
  const int w = workers();
#pragma omp parallel for schedule(dynamic, 1) num_threads(w)
  for (std::int64_t i = 0; i < n; ++i) body(ctx, i);
}

}  // namespace detail

}  // namespace covspde
