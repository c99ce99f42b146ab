#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "exitsim/rng.hpp"

using namespace exitsim;

namespace {

struct Moments {
    double mean_w = 0, var_w = 0, mean_z = 0, var_z = 0, cov = 0;
    double se_var_w = 0, se_var_z = 0, se_cov = 0;
};

// Plain two-pass sample moments; standard errors of the second moments use
// the sample fourth moments.
Moments moments(const std::vector<double>& w, const std::vector<double>& z) {
    const double n = static_cast<double>(w.size());
    Moments m;
    for (std::size_t i = 0; i < w.size(); ++i) {
        m.mean_w += w[i] / n;
        m.mean_z += z[i] / n;
    }
    double m4w = 0, m4z = 0, m22 = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double a = w[i] - m.mean_w, b = z[i] - m.mean_z;
        m.var_w += a * a / (n - 1);
        m.var_z += b * b / (n - 1);
        m.cov += a * b / (n - 1);
        m4w += a * a * a * a / n;
        m4z += b * b * b * b / n;
        m22 += a * a * b * b / n;
    }
    m.se_var_w = std::sqrt((m4w - m.var_w * m.var_w) / n);
    m.se_var_z = std::sqrt((m4z - m.var_z * m.var_z) / n);
    m.se_cov = std::sqrt((m22 - m.cov * m.cov) / n);
    return m;
}

}  // namespace

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswers) {
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::generate(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, PureFunctionOfSeedAndPath) {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 1000; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        if (i == 0) {
            EXPECT_NE(x, c.normal());
            EXPECT_NE(x, d.normal());
        }
    }
}

TEST(RngStream, UniformsInUnitInterval) {
    RngStream r(1, 0);
    double lo = 1, hi = 0, sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LE(hi, 1.0);
    EXPECT_NEAR(sum / n, 0.5, 3 * std::sqrt(1.0 / 12 / n) + 1e-12);
}

TEST(RngStream, CrossStreamCorrelation) {
    const int n = 1000000;
    RngStream a(2024, 0), b(2024, 1);
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.normal(), y = b.normal();
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 1e-2);
}

TEST(MixSeed, DistinctSalts) {
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

TEST(SampleIncrement, OrderOneHasNoDz) {
    RngStream r(3, 0);
    const auto inc = sample_increment<2>(r, 0.25, SchemeOrder::order1);
    EXPECT_FALSE(inc.dz.has_value());
    EXPECT_EQ(inc.dt, 0.25);
}

TEST(SampleIncrement, OrderOneVariance) {
    const int n = 1000000;
    RngStream r(11, 0);
    std::vector<double> w(n), zero(n, 0.0);
    for (int i = 0; i < n; ++i) w[i] = sample_increment<1>(r, 0.25, SchemeOrder::order1).dw[0];
    const auto m = moments(w, zero);
    EXPECT_NEAR(m.mean_w, 0.0, 3 * std::sqrt(0.25 / n));
    EXPECT_NEAR(m.var_w, 0.25, 3 * m.se_var_w);
}

TEST(SampleIncrement, OrderOneFiveMoments) {
    const int n = 1000000;
    RngStream r(12, 0);
    std::vector<double> w(n), z(n);
    for (int i = 0; i < n; ++i) {
        const auto inc = sample_increment<1>(r, 1.0, SchemeOrder::order15);
        w[i] = inc.dw[0];
        z[i] = (*inc.dz)[0];
    }
    const auto m = moments(w, z);
    EXPECT_NEAR(m.mean_w, 0.0, 3 * std::sqrt(1.0 / n));
    EXPECT_NEAR(m.mean_z, 0.0, 3 * std::sqrt(1.0 / 3 / n));
    EXPECT_NEAR(m.var_w, 1.0, 3 * m.se_var_w);
    EXPECT_NEAR(m.var_z, 1.0 / 3, 3 * m.se_var_z);
    EXPECT_NEAR(m.cov, 0.5, 3 * m.se_cov);
}

TEST(SampleIncrement, ScalesWithDt) {
    // Same stream, different dt: dw scales with sqrt(dt), dz with dt^{3/2}.
    RngStream a(5, 3), b(5, 3);
    const auto x = sample_increment<1>(a, 1.0, SchemeOrder::order15);
    const auto y = sample_increment<1>(b, 0.04, SchemeOrder::order15);
    EXPECT_NEAR(y.dw[0], 0.2 * x.dw[0], 1e-15);
    EXPECT_NEAR((*y.dz)[0], 0.008 * (*x.dz)[0], 1e-15);
}

TEST(SampleIncrement, ComponentsUncorrelated) {
    const int n = 500000;
    RngStream r(13, 0);
    double s01 = 0, s00 = 0, s11 = 0, z01 = 0;
    for (int i = 0; i < n; ++i) {
        const auto inc = sample_increment<2>(r, 1.0, SchemeOrder::order15);
        s01 += inc.dw[0] * inc.dw[1];
        s00 += inc.dw[0] * inc.dw[0];
        s11 += inc.dw[1] * inc.dw[1];
        z01 += inc.dw[0] * (*inc.dz)[1];
    }
    EXPECT_LT(std::abs(s01 / std::sqrt(s00 * s11)), 1e-2);
    EXPECT_LT(std::abs(z01 / n), 4 * std::sqrt(1.0 / 3 / n));
}
