#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace concord::synth {

/// Stationary AR(1) around `mean`: y_t = mean + e_t, e_t = phi e_{t-1} + n_t,
/// n_t ~ N(0, innovation_std^2), e_0 drawn from the stationary law.
std::vector<double> ar1(std::size_t n, double phi, double innovation_std, double mean,
                        std::uint64_t seed);

/// Slow sinusoid plus AR(1) noise:
/// y_t = amplitude * sin(2 pi t / period) + AR1(phi, innovation_std).
std::vector<double> sinusoid_ar1(std::size_t n, double amplitude, double period, double phi,
                                 double innovation_std, std::uint64_t seed);

/// Write values as a two-column CSV (t,y). Atomic.
void write_csv(const std::filesystem::path& path, const std::vector<double>& values);

}  // namespace concord::synth
