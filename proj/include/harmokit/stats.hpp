#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harmokit {

enum class WilcoxonMethod { Auto, Exact, Normal };

// Auto uses the exact null distribution up to this many non-zero differences.
inline constexpr int kExactWilcoxonLimit = 25;
inline constexpr int kMinWilcoxonN = 5;

struct StatTestResult {
    double statistic = 0.0;  // W = min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    double p_value = 1.0;    // two-sided
    int n_effective = 0;     // after dropping zero differences
    std::string method;      // "exact" or "normal"
};

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Paired two-sided Wilcoxon signed-rank test on d = x - y.
///
/// Zero differences are dropped and tied |d| share average ranks. The exact
/// p-value counts all 2^N sign assignments by dynamic programming over
/// doubled rank sums; the normal approximation uses the tie-corrected
/// variance and a 0.5 continuity correction.
StatTestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

struct MultipleTestResult {
    std::vector<double> adjusted;
    std::vector<bool> reject;
};

// p_adj = min(1, m p); reject iff p_adj <= alpha.
MultipleTestResult bonferroni(std::span<const double> p_values, double alpha);

// Step-up FDR: p_adj(i) = min_{j >= i} m p(j) / j over sorted p, clamped to 1;
// reported in input order. Reject iff p_adj <= q.
MultipleTestResult benjamini_hochberg(std::span<const double> p_values, double q);

double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace harmokit
