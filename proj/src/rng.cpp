#include "mstgd/rng.hpp"

#include <numeric>

namespace mstgd::rng {

std::vector<long> sample_without_replacement(long n, long count, Engine& eng) {
  if (count < 0 || count > n)
    throw std::invalid_argument("sample_without_replacement: count out of range");
  std::vector<long> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0L);
  std::vector<long> out(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    const long j = i + static_cast<long>(eng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace mstgd::rng
