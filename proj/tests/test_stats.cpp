#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rml/errors.hpp"
#include "rml/stats.hpp"

using namespace rml::stats;

namespace {

// quadrature oracle: adaptive Simpson integration of the t density
double t_pdf(double x, double nu) {
    const double ln = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                      0.5 * std::log(nu * M_PI) -
                      (nu + 1.0) / 2.0 * std::log1p(x * x / nu);
    return std::exp(ln);
}

double simpson(double a, double b, double nu, int n) {
    const double h = (b - a) / n;
    double acc = t_pdf(a, nu) + t_pdf(b, nu);
    for (int i = 1; i < n; ++i) acc += t_pdf(a + i * h, nu) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double t_cdf_oracle(double t, double nu) {
    // symmetry makes the integral finite: F(t) = 1/2 + int_0^t pdf
    // (a left-truncated integral mishandles the heavy nu=1 tail)
    if (t == 0.0) return 0.5;
    const double half = simpson(0.0, std::fabs(t), nu, 200000);
    return t > 0.0 ? 0.5 + half : 0.5 - half;
}

}  // namespace

TEST_CASE("student_t_cdf basics") {
    for (double nu : {1.0, 5.0, 42.0}) {
        CHECK(student_t_cdf(0.0, nu) == 0.5);
        CHECK(student_t_cdf(1e8, nu) == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(student_t_cdf(-1e8, nu) == doctest::Approx(0.0).scale(1).epsilon(1e-7));
        // symmetry
        for (double t : {0.3, 1.7, 2.9}) {
            CHECK(student_t_cdf(-t, nu) == doctest::Approx(1.0 - student_t_cdf(t, nu)));
        }
    }
}

TEST_CASE("student_t_cdf matches the quadrature oracle") {
    for (double nu : {1.0, 5.0, 9.0, 42.0, 53.0}) {
        for (double t : {-3.0, -1.2, -0.4, 0.0, 0.7, 1.5, 2.5}) {
            CHECK(student_t_cdf(t, nu) == doctest::Approx(t_cdf_oracle(t, nu)).epsilon(1e-8));
        }
    }
}

TEST_CASE("paired_tost basics") {
    SUBCASE("identical systems are equivalent by the degenerate convention") {
        std::vector<double> x{0.4, 0.6, 0.5, 0.7};
        auto r = paired_tost(x, x);
        CHECK(r.equivalent);
        CHECK(r.p_tost == 0.0);
        CHECK(r.mean_diff == 0.0);
    }

    SUBCASE("zero variance with a large shift is not equivalent") {
        std::vector<double> x{0.5, 0.6, 0.7};
        std::vector<double> y{0.4, 0.5, 0.6};
        auto r = paired_tost(x, y, 0.05);
        CHECK_FALSE(r.equivalent);
        CHECK(r.p_tost == 1.0);
        CHECK(r.mean_diff == doctest::Approx(0.1));
    }

    SUBCASE("mean difference at the bound cannot be equivalent") {
        std::vector<double> x{0.10, 0.12, 0.08, 0.11, 0.09};
        std::vector<double> y(5);
        double mean = 0.0;
        for (double v : x) mean += v / 5.0;
        for (std::size_t i = 0; i < 5; ++i) y[i] = x[i] - (0.05 - mean) - mean;
        // shift so that mean(x - y) == epsilon_L exactly
        double check = 0.0;
        for (std::size_t i = 0; i < 5; ++i) check += (x[i] - y[i]) / 5.0;
        REQUIRE(check == doctest::Approx(0.05));
        auto r = paired_tost(x, y, 0.05);
        CHECK(r.p_upper >= 0.5);
        CHECK_FALSE(r.equivalent);
    }

    SUBCASE("n < 2 is rejected") {
        CHECK_THROWS_AS((void)paired_tost({0.5}, {0.5}), rml::DataError);
        CHECK_THROWS_AS((void)paired_tost({0.5, 0.6}, {0.5}), rml::DataError);
    }
}

TEST_CASE("paired_tost p-values match the t-CDF oracle") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (std::size_t n : {10, 43, 54}) {
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> x(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = 0.5 + noise(rng);
                y[i] = x[i] - noise(rng);
            }
            auto r = paired_tost(x, y, 0.05);

            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += (x[i] - y[i]) / n;
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) ss += std::pow((x[i] - y[i]) - mean, 2);
            const double se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
            const double nu = static_cast<double>(n - 1);
            CHECK(r.p_lower ==
                  doctest::Approx(1.0 - t_cdf_oracle((mean + 0.05) / se, nu)).epsilon(1e-6).scale(1));
            CHECK(r.p_upper ==
                  doctest::Approx(t_cdf_oracle((mean - 0.05) / se, nu)).epsilon(1e-6).scale(1));
        }
    }
}

TEST_CASE("paired_tost symmetry and epsilon monotonicity") {
    std::mt19937_64 rng(47);
    std::normal_distribution<double> noise(0.01, 0.05);
    std::vector<double> x(20), y(20);
    for (std::size_t i = 0; i < 20; ++i) {
        x[i] = 0.5 + noise(rng);
        y[i] = 0.5 + noise(rng);
    }
    auto ab = paired_tost(x, y);
    auto ba = paired_tost(y, x);
    CHECK(ab.mean_diff == doctest::Approx(-ba.mean_diff));
    CHECK(ab.p_lower == doctest::Approx(ba.p_upper));
    CHECK(ab.p_upper == doctest::Approx(ba.p_lower));
    CHECK(ab.equivalent == ba.equivalent);

    bool was_equivalent = false;
    for (double eps = 0.005; eps <= 0.3; eps += 0.005) {
        const bool now = paired_tost(x, y, eps).equivalent;
        if (was_equivalent) CHECK(now);  // growing the bound never flips back
        was_equivalent = now;
    }
}

TEST_CASE("bonferroni") {
    CHECK(bonferroni({0.03}, 1) == std::vector<double>{0.03});
    CHECK(bonferroni({0.6}, 2) == std::vector<double>{1.0});
    CHECK(bonferroni({0.01}, 5) == std::vector<double>{0.05});
    CHECK_THROWS_AS((void)bonferroni({0.1, 0.2}, 1), rml::UsageError);
    CHECK_THROWS_AS((void)bonferroni({1.5}, 2), rml::UsageError);
    CHECK_THROWS_AS((void)bonferroni({}, 3), rml::UsageError);
}
