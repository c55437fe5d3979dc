#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace transsplat {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  Io,
  NonSpdCovariance,
  NoVisibleTarget,
  AllZeroAttention,
  EmptySupport,
  TooFewPixels,
  ZeroRegionAttention,
  NoVisibleGaussians,
  ZeroFootprint,
  NumericalOverflow,
  MisalignedViews,
  NoValidViews,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. Callers that need to distinguish
/// kinds switch on code(); the CLI maps all of them to exit status 2.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Dense row-major raster with channel-last layout.
template <class T>
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int h, int w, int c, T fill = T{})
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }
  T& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const T& at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  T* pixel(std::size_t index) { return data.data() + index * channels; }
  const T* pixel(std::size_t index) const { return data.data() + index * channels; }

  bool operator==(const Raster&) const = default;
};

using RasterF = Raster<float>;
using RasterD = Raster<double>;
using MaskRaster = Raster<std::uint8_t>;

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t index = 0);

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Runs fn(k) for k in [0, count) on up to `threads` workers. Callers write
/// results into pre-sized slots so output never depends on scheduling.
/// The first exception thrown by any task is rethrown.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int k = w; k < count; k += workers) {
        try {
          fn(k);
        } catch (...) {
          errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace transsplat
