#pragma once

#include <vector>

namespace fluidmc {

/// Upper-tail chi-square critical value at significance 1e-3 for small df
/// (frozen from standard tables).
double chi_square_critical_1e3(int df);

/// Pearson statistic for an r x c contingency table under independence of
/// rows and columns. counts is row-major.
double chi_square_independence(const std::vector<std::vector<double>>& counts);

/// Pearson statistic for homogeneity of two samples of category counts.
double chi_square_two_sample(const std::vector<double>& a,
                             const std::vector<double>& b);

struct KsResult {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
};

/// Two-sample Kolmogorov-Smirnov test at the given significance (asymptotic
/// threshold c(alpha) sqrt((n+m)/(nm))).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b,
                       double significance);

double binomial_std_error(double fraction, int n);

}  // namespace fluidmc
