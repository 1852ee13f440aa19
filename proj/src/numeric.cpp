#include "imulab/numeric.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <omp.h>

#include "imulab/errors.hpp"

namespace imulab {

namespace {
constexpr std::size_t kPairwiseBlock = 128;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= kPairwiseBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of an empty sequence");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("sample variance needs at least two values");
  const double m = mean(values);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m;
    sq[i] = d * d;
  }
  return pairwise_sum(sq) / static_cast<double>(values.size() - 1);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidArgument("loglog_slope needs two equal-length series of at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("loglog_slope needs positive values");
    const double lx = std::log10(x[i]);
    const double ly = std::log10(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw InvalidArgument("loglog_slope needs distinct x values");
  return (n * sxy - sx * sy) / denom;
}

int thread_limit() {
  if (const char* env = std::getenv("IMULAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
      // unparsable values fall back to the OpenMP default
    }
  }
  return omp_get_max_threads();
}

}  // namespace imulab
