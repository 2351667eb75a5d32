#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace mfcopula {

// Selects the OpenMP kernel or the serial reference loop. Both paths
// produce bit-identical results; the serial one is kept for testing.
enum class Execution { serial, parallel };

// Runs body(k) for k in [0, n). Iterations must write disjoint outputs.
// The first exception thrown by any iteration is rethrown on the caller.
template <class Body>
void for_each_index(std::ptrdiff_t n, Execution exec, Body&& body) {
  if (exec == Execution::serial) {
    for (std::ptrdiff_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      body(k);
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mfcopula
