#include <gtest/gtest.h>

#include <cstring>
#include <noisesync/sweep.hpp>

using namespace noisesync;

TEST(Golden, LocatesQuadraticPeak) {
    int calls = 0;
    const auto g = golden_section_maximize(
        [&](double x) {
            ++calls;
            return 2.0 - (x - 1.3) * (x - 1.3);
        },
        0.0, 3.0, 1e-9);
    // f is flat to O(dx^2) at the peak, so x resolves only to ~sqrt(eps)
    EXPECT_NEAR(g.x, 1.3, 5e-8);
    EXPECT_NEAR(g.fx, 2.0, 1e-15);
    EXPECT_EQ(g.evaluations, calls);
    // bracket shrinks by 0.618 per call: ln(3e9) / ln(1.618) ~ 46
    EXPECT_LT(calls, 50);
    EXPECT_THROW(golden_section_maximize([](double) { return 0.0; }, 1.0, 1.0, 1e-3), PreconditionError);
}

TEST(Unimodal, ShapeDetection) {
    EXPECT_TRUE(is_unimodal({0, 1, 3, 2, 1}, 2));
    EXPECT_TRUE(is_unimodal({0, 1, 3, 3, 1}, 2));
    EXPECT_FALSE(is_unimodal({0, 2, 1, 3, 1}, 3));
    EXPECT_FALSE(is_unimodal({0, 1, 3, 1, 2}, 2));
}

TEST(Continuity, FlagsJumpsNotSmoothGrowth) {
    const std::vector<double> g{0.1, 0.2, 0.4, 0.8};
    // r = g: midpoints exactly on the log-log interpolation
    std::vector<double> r{0.1, 0.2, 0.4, 0.8}, mid{std::sqrt(0.02), std::sqrt(0.08), std::sqrt(0.32)};
    EXPECT_TRUE(find_discontinuities(g, r, mid, 0.2).empty());
    // a branch switch inside the second interval
    mid[1] = 0.5;
    const auto flags = find_discontinuities(g, r, mid, 0.2);
    ASSERT_EQ(flags.size(), 1u);
    EXPECT_EQ(flags[0].gamma_lo, 0.2);
    mid[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_TRUE(find_discontinuities(g, r, mid, 0.2).empty());
}

TEST(RateCurve, EndpointsAndSmallGammaSlope) {
    const ChainSpec c{5, 1, 1};
    SweepOptions opt;
    opt.check_continuity = false;
    const auto s = rate_curve(c, {3}, {0.0, 1e-5, 1e-4, 1.0, 5.0, 10.0}, opt);
    EXPECT_EQ(s.r[0], 0.0);
    // first-order regime: r = gamma m13 with m13 = 4/9
    EXPECT_NEAR(s.r[1] / 1e-5, 4.0 / 9.0, 1e-4);
    EXPECT_NEAR(s.r[2] / 1e-4, 4.0 / 9.0, 1e-3);
    EXPECT_GT(s.r[4], s.r[5]);
    for (double r : s.r) EXPECT_GE(r, 0.0);
}

TEST(RateCurve, RefinedOptimumDominatesDenseGrid) {
    const ChainSpec c{5, 1, 1};
    const auto s = rate_curve(c, {3}, default_gamma_grid());
    ASSERT_TRUE(s.single_optimum());
    EXPECT_TRUE(s.refined);
    EXPECT_TRUE(s.continuity_flags.empty());
    EXPECT_GT(s.gamma_opt, s.gamma[s.grid_argmax - 1]);
    EXPECT_LT(s.gamma_opt, s.gamma[s.grid_argmax + 1]);
    // no point of a 400-point scan of the bracket beats the refined maximum
    const double lo = std::log(s.gamma[s.grid_argmax - 1]), hi = std::log(s.gamma[s.grid_argmax + 1]);
    double best = 0, best_g = 0;
    for (int i = 0; i <= 400; ++i) {
        const double g = std::exp(lo + (hi - lo) * i / 400.0);
        const double r = sync_timing(c, {{3}, g}).r;
        if (r > best) best = r, best_g = g;
    }
    EXPECT_GE(s.r_max, best * (1 - 1e-9));
    EXPECT_NEAR(s.gamma_opt, best_g, 1e-2 * best_g);
    EXPECT_NEAR(s.r_max, sync_timing(c, {{3}, s.gamma_opt}).r, 1e-15);
}

TEST(RateCurve, EdgeOptimumIsFlaggedNotRefined) {
    SweepOptions opt;
    opt.check_continuity = false;
    const auto s = rate_curve({5, 1, 1}, {3}, log_grid(1e-3, 1e-2, 5), opt);
    EXPECT_FALSE(s.interior_optimum);
    EXPECT_FALSE(s.refined);
    EXPECT_EQ(s.grid_argmax, 4u);
    EXPECT_EQ(s.gamma_opt, 1e-2);
}

TEST(RateCurve, BitwiseIndependentOfWorkers) {
    SweepOptions opt;
    opt.workers = 1;
    const auto a = rate_curve({8, 1, 1}, {3}, log_grid(1e-2, 3, 12), opt);
    opt.workers = 3;
    const auto b = rate_curve({8, 1, 1}, {3}, log_grid(1e-2, 3, 12), opt);
    ASSERT_EQ(a.r.size(), b.r.size());
    EXPECT_EQ(std::memcmp(a.r.data(), b.r.data(), sizeof(double) * a.r.size()), 0);
    EXPECT_EQ(a.gamma_opt, b.gamma_opt);
    EXPECT_EQ(a.r_max, b.r_max);
}

TEST(RateCurve, RejectsBadGrids) {
    EXPECT_THROW(rate_curve({5, 1, 1}, {3}, {0.1, 0.05, 1.0}), PreconditionError);
    EXPECT_THROW(rate_curve({5, 1, 1}, {3}, {-0.1, 0.05, 1.0}), PreconditionError);
    EXPECT_THROW(rate_curve({5, 1, 1}, {6}, {0.1, 0.5, 1.0}), PreconditionError);
}

namespace {

std::vector<double> model(const std::vector<double>& x, double a, double b, double c) {
    std::vector<double> y;
    for (double n : x) y.push_back(a + b / ((n + c) * (n + c)));
    return y;
}

// Gradient of the squared residual computed from scratch.
double gradient_norm(const FitResult& f, const std::vector<double>& x, const std::vector<double>& y) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = x[i] + f.c;
        const double r = f(x[i]) - y[i];
        g += r * Eigen::Vector3d(1.0, 1.0 / (s * s), -2.0 * f.b / (s * s * s));
    }
    return g.norm();
}

}  // namespace

TEST(Fit, RecoversExactParameters) {
    const std::vector<double> x{8, 11, 14, 17, 20, 23};
    const auto f0 = fit_inverse_square(x, model(x, 0, 1, 0));
    EXPECT_NEAR(f0.a, 0, 1e-8);
    EXPECT_NEAR(f0.b, 1, 1e-8);
    EXPECT_NEAR(f0.c, 0, 1e-8);
    const auto f1 = fit_inverse_square(x, model(x, -0.008, 1.357, -4.289));
    EXPECT_NEAR(f1.a, -0.008, 1e-8);
    EXPECT_NEAR(f1.b, 1.357, 1e-8);
    EXPECT_NEAR(f1.c, -4.289, 1e-8);
    EXPECT_NEAR(f1.r_squared, 1.0, 1e-12);
    const auto f2 = fit_inverse_square(x, model(x, 0.182, 12.289, -0.66));
    EXPECT_NEAR(f2.b, 12.289, 1e-6);
    EXPECT_NEAR(f2.c, -0.66, 1e-8);
}

TEST(Fit, NoisyDataIsStationary) {
    const std::vector<double> x{8, 11, 14, 17, 20};
    auto y = model(x, 0.002, 1.5, -4.0);
    const double wiggle[] = {1.02, 0.99, 1.01, 0.98, 1.005};
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= wiggle[i];
    const auto f = fit_inverse_square(x, y);
    EXPECT_LT(gradient_norm(f, x, y), 1e-8);
    EXPECT_LT(f.gradient_norm, 1e-8);
    EXPECT_GT(f.residual_norm, 0.0);
    EXPECT_LT(f.r_squared, 1.0);
    EXPECT_GT(f.r_squared, 0.99);
    for (double n : x) EXPECT_GT(n + f.c, 0.0);
}

TEST(Fit, DegenerateDataReportsFailure) {
    // constant data drives b to zero, where the c column of the Jacobian vanishes
    const std::vector<double> x{8, 11, 14, 17};
    EXPECT_THROW(fit_inverse_square(x, {0.3, 0.3, 0.3, 0.3}), NumericalError);
    EXPECT_THROW(fit_inverse_square({8, 11}, {0.1, 0.2}), PreconditionError);
}

TEST(LiebRobinson, PowerLawAndPlateau) {
    ScalingStudy s;
    s.n_values = {8, 11, 14, 17, 20};
    for (int n : s.n_values) {
        s.r_max.push_back(3.0 / (n * n));
        s.gamma_opt.push_back(0.2 + 1.0 / n);
    }
    s.r_max_fit = FitResult{0.0, 3.0, 0.0};
    const auto rep = lieb_robinson_report(s, {20, 1.5, 1});
    EXPECT_EQ(rep.v_lr, 3.0);
    EXPECT_NEAR(rep.slope, -2.0, 1e-12);
    EXPECT_NEAR(rep.shifted_slope, -2.0, 1e-12);
    EXPECT_TRUE(rep.gamma_opt_decreasing);
    EXPECT_NEAR(rep.gamma_opt_plateau, 0.2 + 0.5 * (1.0 / 20 + 1.0 / 17), 1e-15);
    EXPECT_NEAR(rep.light_cone.back(), 20 / 3.0, 1e-15);
}

TEST(ScalingStudy, SmallFamilyFits) {
    SweepOptions opt;
    opt.check_continuity = false;
    const auto s = scaling_study({5, 8, 11, 14}, 3, log_grid(0.05, 5, 24), opt);
    ASSERT_EQ(s.curves.size(), 4u);
    for (std::size_t i = 1; i < 4; ++i) {
        EXPECT_LT(s.r_max[i], s.r_max[i - 1]);
        EXPECT_LT(s.gamma_opt[i], s.gamma_opt[i - 1]);
    }
    EXPECT_EQ(s.r_max_fit.n_points, 3);
    EXPECT_NEAR(s.r_max_fit(11), s.r_max[2], 1e-9);
    EXPECT_THROW(scaling_study({5, 7}, 3, log_grid(0.05, 5, 8), opt), PreconditionError);
}
