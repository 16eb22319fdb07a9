#include "kfp/fft.hpp"

#include <fftw3.h>

#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace kfp::fft {
namespace {

using Key = std::tuple<std::vector<int>, int, int, int, int>;

// Planning is not thread-safe in FFTW; execution of an existing plan on new arrays is.
std::mutex g_plan_mutex;

fftw_plan plan_for(const Batch& b, Direction dir) {
  static std::map<Key, fftw_plan> cache;
  const int sign = dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  Key key{b.dims, b.howmany, b.stride, b.dist, sign};
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const long per = std::accumulate(b.dims.begin(), b.dims.end(), 1L, std::multiplies<long>());
  const long span = static_cast<long>(b.howmany - 1) * b.dist + (per - 1) * b.stride + 1;
  auto* scratch = fftw_alloc_complex(static_cast<size_t>(span));
  fftw_plan p = fftw_plan_many_dft(static_cast<int>(b.dims.size()), b.dims.data(), b.howmany,
                                   scratch, nullptr, b.stride, b.dist,
                                   scratch, nullptr, b.stride, b.dist,
                                   sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(scratch);
  if (!p) throw std::runtime_error("fftw planning failed");
  cache.emplace(std::move(key), p);
  return p;
}

}  // namespace

void transform(cplx* data, const Batch& batch, Direction dir) {
  Batch b = batch;
  if (b.dist == 0) {
    b.dist = std::accumulate(b.dims.begin(), b.dims.end(), 1, std::multiplies<int>());
  }
  fftw_plan p = plan_for(b, dir);
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, ptr, ptr);
}

}  // namespace kfp::fft
