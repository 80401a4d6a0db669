#include "rnls/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace rnls::fft {
namespace {

// FFTW planning is not thread-safe; execution through the new-array
// interface is. Plans are in-place and created once per shape.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int dim, int n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(dim, n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::size_t total = dim == 1 ? std::size_t(n) : std::size_t(n) * n;
    std::vector<cplx> scratch(total);
    auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = dim == 1 ? fftw_plan_dft_1d(n, data, data, sign, flags)
                              : fftw_plan_dft_2d(n, n, data, data, sign, flags);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

void run(int dim, int n, int sign, std::span<const cplx> in, std::span<cplx> out) {
  if (in.data() != out.data()) std::copy(in.begin(), in.end(), out.begin());
  fftw_plan plan = PlanCache::instance().get(dim, n, sign);
  auto* data = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan, data, data);
}

}  // namespace

void forward(const Grid& grid, std::span<const cplx> in, std::span<cplx> out) {
  run(grid.dim(), grid.n(), FFTW_FORWARD, in, out);
}

void inverse(const Grid& grid, std::span<const cplx> in, std::span<cplx> out) {
  run(grid.dim(), grid.n(), FFTW_BACKWARD, in, out);
  const double scale = 1.0 / double(grid.size());
  for (auto& v : out) v *= scale;
}

void forward_1d(int n, std::span<const cplx> in, std::span<cplx> out) { run(1, n, FFTW_FORWARD, in, out); }

void inverse_1d(int n, std::span<const cplx> in, std::span<cplx> out) {
  run(1, n, FFTW_BACKWARD, in, out);
  const double scale = 1.0 / n;
  for (auto& v : out) v *= scale;
}

}  // namespace rnls::fft
