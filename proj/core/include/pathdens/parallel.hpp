#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace pathdens {

// Number of workers from an explicit request, else PATHDENS_WORKERS, else 1.
std::size_t resolve_workers(std::size_t requested);

// Runs body(i) for i in [0, count) on up to `workers` threads. Exceptions are
// rethrown on the caller thread (lowest index first).
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

// Ordered map: result[i] = fn(i), independent of the number of workers.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<T> out(count);
  parallel_for(count, workers, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace pathdens
