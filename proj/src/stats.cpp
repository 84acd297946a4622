#include "harmokit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace harmokit {

namespace {

void check_p_values(std::span<const double> p) {
    for (double v : p) {
        if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("p-values must lie in (0, 1]");
    }
}

// P(W+ <= w) and P(W+ >= w) under the exact null, ranks given doubled.
std::pair<double, double> exact_tails(const std::vector<int>& doubled_ranks, int doubled_w) {
    const int total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0);
    std::vector<double> dist(static_cast<std::size_t>(total) + 1, 0.0);
    dist[0] = 1.0;
    int reach = 0;
    for (int r : doubled_ranks) {
        for (int s = reach; s >= 0; --s) {
            const double v = dist[static_cast<std::size_t>(s)] * 0.5;
            dist[static_cast<std::size_t>(s)] = v;
            dist[static_cast<std::size_t>(s + r)] += v;
        }
        reach += r;
    }
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= total; ++s) {
        if (s <= doubled_w) lower += dist[static_cast<std::size_t>(s)];
        if (s >= doubled_w) upper += dist[static_cast<std::size_t>(s)];
    }
    return {lower, upper};
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

StatTestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, WilcoxonMethod method) {
    if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: x and y lengths differ");
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - y[i];
        if (!std::isfinite(v)) throw std::invalid_argument("wilcoxon: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) throw std::invalid_argument("wilcoxon: all differences are zero");
    const int n = static_cast<int>(d.size());
    if (n < kMinWilcoxonN) {
        throw std::invalid_argument("wilcoxon: N < 5 after dropping zero differences (N = " + std::to_string(n) + ")");
    }

    std::vector<double> mag(d.size());
    std::transform(d.begin(), d.end(), mag.begin(), [](double v) { return std::fabs(v); });
    const auto ranks = average_ranks(mag);

    StatTestResult r;
    r.n_effective = n;
    for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
    r.statistic = std::min(r.w_plus, r.w_minus);

    const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && n <= kExactWilcoxonLimit);
    if (exact) {
        std::vector<int> doubled(ranks.size());
        std::transform(ranks.begin(), ranks.end(), doubled.begin(), [](double rk) { return static_cast<int>(std::lround(2.0 * rk)); });
        const auto [lower, upper] = exact_tails(doubled, static_cast<int>(std::lround(2.0 * r.w_plus)));
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
        r.method = "exact";
    } else {
        const double nn = n;
        const double mean = nn * (nn + 1.0) / 4.0;
        double tie_term = 0.0;
        std::vector<double> sorted = mag;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        const double z = std::max(0.0, std::fabs(r.w_plus - mean) - 0.5) / std::sqrt(var);
        r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        r.method = "normal";
    }
    return r;
}

MultipleTestResult bonferroni(std::span<const double> p_values, double alpha) {
    check_p_values(p_values);
    const double m = static_cast<double>(p_values.size());
    MultipleTestResult out;
    for (double p : p_values) {
        const double adj = std::min(1.0, m * p);
        out.adjusted.push_back(adj);
        out.reject.push_back(adj <= alpha);
    }
    return out;
}

MultipleTestResult benjamini_hochberg(std::span<const double> p_values, double q) {
    check_p_values(p_values);
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    MultipleTestResult out;
    out.adjusted.assign(m, 1.0);
    out.reject.assign(m, false);
    double running = 1.0;
    for (std::size_t rank = m; rank-- > 0;) {
        const std::size_t idx = order[rank];
        running = std::min(running, static_cast<double>(m) * p_values[idx] / static_cast<double>(rank + 1));
        out.adjusted[idx] = std::min(1.0, running);
    }
    for (std::size_t i = 0; i < m; ++i) out.reject[i] = out.adjusted[i] <= q;
    return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs two equal-length samples, N >= 2");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace harmokit
