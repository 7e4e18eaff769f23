#pragma once

namespace concord::normal {

/// Standard normal density.
double pdf(double z);

/// Standard normal CDF, accurate over the full double range (erfc based).
double cdf(double z);

/**
 * @brief Inverse standard normal CDF.
 *
 * Rational initial guess refined with two Halley steps against the
 * erfc-based CDF; relative error is at the level of machine rounding
 * for p in (0, 1). Throws std::invalid_argument outside (0, 1).
 */
double quantile(double p);

}  // namespace concord::normal
