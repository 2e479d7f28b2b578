#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "adlsense/error.hpp"

namespace adlsense::eval {

namespace detail {

// Series for the lower regularized gamma P(a, x); converges for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 1000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for the upper regularized gamma Q(a, x).
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Upper regularized incomplete gamma Q(a, x). Series below x = a + 1,
// continued fraction above.
inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw ValidationError("regularized gamma needs a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_fraction(a, x);
}

inline double chi_square_upper_tail(double statistic, double df) {
    return regularized_gamma_q(df / 2.0, std::max(statistic, 0.0) / 2.0);
}

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Ascending ranks with ties sharing their mean rank (1-based).
inline std::vector<double> midranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

struct FriedmanResult {
    double q = 0.0;
    std::size_t df = 0;
    double p = 1.0;
    std::vector<double> rank_sums;
    std::size_t blocks = 0;

    friend bool operator==(const FriedmanResult&, const FriedmanResult&) = default;
};

// outcomes: n blocks (rows) x k methods (columns).
inline FriedmanResult friedman_test(const std::vector<std::vector<double>>& outcomes) {
    const std::size_t n = outcomes.size();
    if (n < 2) throw ValidationError("Friedman test needs at least two blocks");
    const std::size_t k = outcomes.front().size();
    if (k < 2) throw ValidationError("Friedman test needs at least two methods");
    FriedmanResult res;
    res.blocks = n;
    res.rank_sums.assign(k, 0.0);
    for (const auto& row : outcomes) {
        if (row.size() != k) throw ValidationError("Friedman test: ragged outcome matrix");
        for (double v : row) {
            if (!std::isfinite(v)) throw ValidationError("Friedman test: non-finite outcome");
        }
        const auto r = midranks(row);
        for (std::size_t j = 0; j < k; ++j) res.rank_sums[j] += r[j];
    }
    double sum_sq = 0.0;
    for (double r : res.rank_sums) sum_sq += r * r;
    const double nd = static_cast<double>(n), kd = static_cast<double>(k);
    res.q = 12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
    // cancellation noise around an exact zero (all rank sums equal)
    if (std::abs(res.q) < 1e-12 * 3.0 * nd * (kd + 1.0)) res.q = 0.0;
    res.df = k - 1;
    res.p = chi_square_upper_tail(res.q, static_cast<double>(res.df));
    return res;
}

struct McNemarResult {
    std::size_t b = 0;  // method A correct, B wrong
    std::size_t c = 0;  // method A wrong, B correct
    double z = 0.0;     // signed by (b - c)
    double p = 1.0;     // two-sided, normal approximation
    std::optional<double> exact_p;  // two-sided binomial, reported when b + c <= 25

    friend bool operator==(const McNemarResult&, const McNemarResult&) = default;
};

inline constexpr std::size_t kExactMcNemarLimit = 25;

inline double exact_binomial_two_sided(std::size_t b, std::size_t c) {
    const std::size_t n = b + c;
    if (n == 0) return 1.0;
    const std::size_t lo = std::min(b, c);
    std::uint64_t coeff = 1, tail = 0;  // C(n, i), exact for n <= 62
    for (std::size_t i = 0; i <= lo; ++i) {
        if (i > 0) coeff = coeff * (n - i + 1) / i;
        tail += coeff;
    }
    return std::min(1.0, 2.0 * std::ldexp(static_cast<double>(tail), -static_cast<int>(n)));
}

// Continuity-corrected statistic clamped at zero.
inline McNemarResult mcnemar_test(std::size_t b, std::size_t c) {
    McNemarResult res;
    res.b = b;
    res.c = c;
    if (b + c > 0) {
        const double diff = static_cast<double>(b) - static_cast<double>(c);
        const double mag = std::max(0.0, std::abs(diff) - 1.0) / std::sqrt(static_cast<double>(b + c));
        res.z = diff < 0 ? -mag : mag;
    }
    res.p = normal_two_sided_p(res.z);
    if (b + c <= kExactMcNemarLimit) res.exact_p = exact_binomial_two_sided(b, c);
    return res;
}

}  // namespace adlsense::eval
