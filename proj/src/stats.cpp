#include "fluidmc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fluidmc {

double chi_square_critical_1e3(int df) {
  switch (df) {
    case 1: return 10.827566;
    case 2: return 13.815511;
    case 3: return 16.266236;
    case 4: return 18.466827;
    case 5: return 20.515006;
    case 6: return 22.457744;
    case 7: return 24.321886;
    case 8: return 26.124482;
    default: throw std::invalid_argument("chi_square_critical_1e3: df not tabulated");
  }
}

double chi_square_independence(const std::vector<std::vector<double>>& counts) {
  const std::size_t rows = counts.size();
  const std::size_t cols = counts.empty() ? 0 : counts[0].size();
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += counts[i][j];
      col_sum[j] += counts[i][j];
      total += counts[i][j];
    }
  double stat = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      if (expected > 0) {
        const double diff = counts[i][j] - expected;
        stat += diff * diff / expected;
      }
    }
  return stat;
}

double chi_square_two_sample(const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::vector<std::vector<double>> table{a, b};
  return chi_square_independence(table);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b,
                       double significance) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  double stat = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    stat = std::max(stat, std::abs(i / n - j / m));
  }
  const double c = std::sqrt(-0.5 * std::log(significance / 2.0));
  KsResult r;
  r.statistic = stat;
  r.threshold = c * std::sqrt((n + m) / (n * m));
  r.reject = stat > r.threshold;
  return r;
}

double binomial_std_error(double fraction, int n) {
  return n > 0 ? std::sqrt(fraction * (1.0 - fraction) / n) : 0.0;
}

}  // namespace fluidmc
