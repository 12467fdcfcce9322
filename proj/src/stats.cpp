#include "rml/stats.hpp"

#include <cmath>
#include <limits>

#include "rml/errors.hpp"

namespace rml::stats {

namespace {

// Lentz continued fraction for the incomplete beta function.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw UsageError("incomplete_beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double nu) {
    if (nu <= 0.0) throw UsageError("student_t_cdf: dof must be positive");
    if (t == 0.0) return 0.5;
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * incomplete_beta(nu / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

EquivalenceResult paired_tost(const std::vector<double>& x, const std::vector<double>& y,
                              double epsilon_L, double alpha) {
    if (x.size() != y.size()) throw DataError("paired_tost: unaligned score vectors");
    const std::size_t n = x.size();
    if (n < 2) throw DataError("paired_tost: need at least 2 paired samples");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i] - y[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (x[i] - y[i]) - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    EquivalenceResult r;
    r.mean_diff = mean;
    r.n = n;
    r.epsilon_L = epsilon_L;

    if (sd == 0.0) {
        // all differences identical: the verdict is decided by the mean alone
        const bool inside = std::fabs(mean) < epsilon_L;
        r.p_lower = r.p_upper = r.p_tost = inside ? 0.0 : 1.0;
        r.equivalent = inside;
        return r;
    }

    const double se = sd / std::sqrt(static_cast<double>(n));
    const double nu = static_cast<double>(n - 1);
    r.p_lower = 1.0 - student_t_cdf((mean + epsilon_L) / se, nu);
    r.p_upper = student_t_cdf((mean - epsilon_L) / se, nu);
    r.p_tost = std::max(r.p_lower, r.p_upper);
    r.equivalent = r.p_tost < alpha;
    return r;
}

std::vector<double> bonferroni(const std::vector<double>& p_values, std::size_t m) {
    if (p_values.empty() || m < p_values.size()) {
        throw UsageError("bonferroni: family size must be >= number of p-values (>= 1)");
    }
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) {
        if (p < 0.0 || p > 1.0) throw UsageError("bonferroni: p-value outside [0, 1]");
        out.push_back(std::min(1.0, p * static_cast<double>(m)));
    }
    return out;
}

}  // namespace rml::stats
