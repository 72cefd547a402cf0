#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "pulselab/simd.hpp"

namespace pulselab::simd {

const Ops& scalar_ops();          // kernels_scalar.cpp
const Ops* avx2_ops_or_null();    // kernels_avx2.cpp, null when unavailable

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend resolve_initial() {
  const bool avx2_ok = avx2_ops_or_null() != nullptr && cpu_has_avx2();
  if (const char* env = std::getenv("PULSELAB_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2") {
      if (!avx2_ok) throw std::runtime_error("PULSELAB_SIMD=avx2: AVX2 unavailable");
      return Backend::avx2;
    }
    // anything else (incl. "auto") falls through to detection
  }
  return avx2_ok ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{resolve_initial()};
  return slot;
}

}  // namespace

bool available(Backend b) {
  if (b == Backend::scalar) return true;
  return avx2_ops_or_null() != nullptr && cpu_has_avx2();
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!available(b)) throw std::runtime_error("requested SIMD backend unavailable");
  backend_slot().store(b, std::memory_order_relaxed);
}

std::string_view name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

const Ops& ops_for(Backend b) {
  if (b == Backend::avx2) {
    const Ops* t = avx2_ops_or_null();
    if (t) return *t;
  }
  return scalar_ops();
}

const Ops& ops() { return ops_for(active_backend()); }

}  // namespace pulselab::simd
