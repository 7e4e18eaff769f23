#include "concord/synthetic.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "concord/csv.hpp"
#include "concord/rng.hpp"

namespace concord::synth {

std::vector<double> ar1(std::size_t n, double phi, double innovation_std, double mean,
                        std::uint64_t seed) {
  if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("ar1: |phi| must be < 1");
  auto engine = rng::make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> out(n);
  double e = gauss(engine) * innovation_std / std::sqrt(1.0 - phi * phi);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = mean + e;
    e = phi * e + innovation_std * gauss(engine);
  }
  return out;
}

std::vector<double> sinusoid_ar1(std::size_t n, double amplitude, double period, double phi,
                                 double innovation_std, std::uint64_t seed) {
  if (!(period > 0.0)) throw std::invalid_argument("sinusoid_ar1: period must be positive");
  std::vector<double> out = ar1(n, phi, innovation_std, 0.0, seed);
  const double omega = 2.0 * M_PI / period;
  for (std::size_t t = 0; t < n; ++t) {
    out[t] += amplitude * std::sin(omega * static_cast<double>(t));
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ostringstream out;
  out << "t,y\n";
  for (std::size_t t = 0; t < values.size(); ++t) {
    out << t << ',' << csv::format_double(values[t]) << '\n';
  }
  csv::write_file_atomic(path, out.str());
}

}  // namespace concord::synth
