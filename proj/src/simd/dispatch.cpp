/*
 * Copyright 2026 The solgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "solgp/simd/kernels.hpp"

namespace solgp::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("SOLGP_SIMD");
  if (env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && backend_supported(Backend::Avx2)) return &table(Backend::Avx2);
  }
  return backend_supported(Backend::Avx2) ? &table(Backend::Avx2) : &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
  }
  return false;
}

const KernelTable& table(Backend b) {
  if (!backend_supported(b)) throw std::invalid_argument("SIMD backend not supported on this CPU");
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::Avx2) return avx2_table();
#endif
  return scalar_table();
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_backend(Backend b) { active_slot().store(&table(b), std::memory_order_release); }

Backend active_backend() { return active().backend; }

}  // namespace solgp::simd
