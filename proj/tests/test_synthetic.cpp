#include <gtest/gtest.h>

#include <cmath>

#include "qcomb/loss.hpp"
#include "qcomb/synthetic.hpp"

using namespace qcomb;

TEST(Distributions, FrozenNormalValues) {
    EXPECT_NEAR(dist::normal_quantile(0.9), 1.2815515655446004, 1e-13);
    EXPECT_NEAR(dist::normal_quantile(0.975), 1.9599639845400545, 1e-13);
    EXPECT_DOUBLE_EQ(dist::normal_quantile(0.5), 0.0);
    for (double p : {0.01, 0.2, 0.45, 0.7, 0.999}) {
        EXPECT_NEAR(dist::normal_quantile(1.0 - p), -dist::normal_quantile(p), 1e-12);
        EXPECT_NEAR(dist::normal_cdf(dist::normal_quantile(p)), p, 1e-12);
    }
    EXPECT_THROW(dist::normal_quantile(0.0), ParameterError);
    EXPECT_THROW(dist::normal_quantile(1.0), ParameterError);
}

TEST(Distributions, FrozenLaplaceValues) {
    EXPECT_DOUBLE_EQ(dist::laplace_quantile(0.5, 3.0), 0.0);
    EXPECT_NEAR(dist::laplace_quantile(0.9, 1.0), 1.6094379124341003, 1e-13);
    EXPECT_NEAR(dist::laplace_quantile(0.1, 1.0), -1.6094379124341003, 1e-13);
    EXPECT_THROW(dist::laplace_quantile(0.5, 0.0), ParameterError);
    EXPECT_THROW(dist::laplace_quantile(0.0, 1.0), ParameterError);
}

TEST(Distributions, FrozenStudentTValues) {
    // References to 1e-8: the CDF's continued fraction is good to about
    // 3e-11, which the steep quantile map stretches toward 1e-9.
    EXPECT_NEAR(dist::student_t_quantile(0.95, 3.0), 2.3533634348019233, 1e-8);
    EXPECT_NEAR(dist::student_t_quantile(0.975, 5.0), 2.5705818366147395, 1e-8);
    EXPECT_NEAR(dist::student_t_quantile(0.1, 10.0), -1.3721836411102861, 1e-8);
    EXPECT_DOUBLE_EQ(dist::student_t_quantile(0.5, 7.0), 0.0);
    for (double p : {0.05, 0.3, 0.6, 0.99})
        for (double nu : {2.5, 4.0, 12.0})
            EXPECT_NEAR(dist::student_t_cdf(dist::student_t_quantile(p, nu), nu), p, 1e-10);
    EXPECT_THROW(dist::student_t_quantile(0.5, 0.0), ParameterError);
    EXPECT_THROW(dist::student_t_cdf(1.0, -1.0), ParameterError);
}

TEST(Scenario, NoiseQuantileDispatch) {
    EXPECT_NEAR(noise_quantile(NoiseFamily::gaussian, {2.0}, 0.9), 2.5631031310892008, 1e-13);
    EXPECT_NEAR(noise_quantile(NoiseFamily::scaled_t, {3.0, 2.0}, 0.95), 4.7067268696038466,
                1e-9);
    EXPECT_DOUBLE_EQ(noise_quantile(NoiseFamily::laplace, {4.0}, 0.5), 0.0);
}

TEST(Scenario, FamilyNamesRoundTrip) {
    EXPECT_EQ(to_string(NoiseFamily::scaled_t), "scaled-t");
    EXPECT_EQ(parse_noise_family("scaled-t"), NoiseFamily::scaled_t);
    EXPECT_EQ(parse_noise_family("scaled_t"), NoiseFamily::scaled_t);
    EXPECT_EQ(parse_noise_family("gaussian"), NoiseFamily::gaussian);
    EXPECT_THROW(parse_noise_family("cauchy"), ParameterError);
}

TEST(Scenario, ValidationRejectsBadParameters) {
    SyntheticScenario s;
    EXPECT_NO_THROW(validate(s));
    SyntheticScenario bad = s;
    bad.length = 3;
    EXPECT_THROW(validate(bad), ParameterError);
    bad = s;
    bad.period = 1.5;
    EXPECT_THROW(validate(bad), ParameterError);
    bad = s;
    bad.noise_params = {0.0};
    EXPECT_THROW(validate(bad), ParameterError);
    bad = s;
    bad.noise = NoiseFamily::scaled_t;
    bad.noise_params = {2.0, 1.0}; // nu must exceed 2
    EXPECT_THROW(validate(bad), ParameterError);
    bad = s;
    bad.splits = {0.5, 0.5, 0.0, 0.0};
    EXPECT_THROW(validate(bad), ParameterError);
    bad = s;
    bad.splits = {0.3, 0.3, 0.3, 0.3};
    EXPECT_THROW(validate(bad), ParameterError);
}

TEST(Scenario, ParseRoundTripAndErrors) {
    const std::string text =
        "# demo scenario\n"
        "seed = 9\n"
        "length = 480\n"
        "level = 50\n"
        "amplitude = 10\n"
        "period = 24\n"
        "noise = scaled-t\n"
        "noise_params = 4,2.5\n"
        "splits = 0.3,0.2,0.3,0.2\n";
    const SyntheticScenario s = parse_scenario(text);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.length, 480u);
    EXPECT_DOUBLE_EQ(s.level, 50.0);
    EXPECT_DOUBLE_EQ(s.amplitude, 10.0);
    EXPECT_DOUBLE_EQ(s.period, 24.0);
    EXPECT_EQ(s.noise, NoiseFamily::scaled_t);
    ASSERT_EQ(s.noise_params.size(), 2u);
    EXPECT_DOUBLE_EQ(s.noise_params[1], 2.5);
    EXPECT_DOUBLE_EQ(s.splits[0], 0.3);

    auto message_of = [](auto&& fn) {
        try {
            fn();
        } catch (const ParameterError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message_of([] { parse_scenario("bogus = 1\n"); }).find("unknown key"),
              std::string::npos);
    EXPECT_NE(message_of([] { parse_scenario("level\n"); }).find("expected key=value"),
              std::string::npos);
    EXPECT_NE(message_of([] { parse_scenario("seed=1\nlevel = abc\n"); }).find("line 2"),
              std::string::npos);
    EXPECT_THROW(parse_scenario("splits = 0.5,0.5\n"), ParameterError);
    EXPECT_THROW(parse_scenario("noise = weird\n"), ParameterError);
}

TEST(Scenario, SplitBoundaries) {
    SyntheticScenario s;
    s.length = 100;
    const auto b = split_boundaries(s);
    EXPECT_EQ(b[0], 25u);
    EXPECT_EQ(b[1], 50u);
    EXPECT_EQ(b[2], 75u);

    SyntheticScenario tiny;
    tiny.length = 4;
    tiny.splits = {0.01, 0.01, 0.01, 0.97};
    EXPECT_THROW(split_boundaries(tiny), ParameterError);
}

TEST(Generate, DeterministicAndSeedSensitive) {
    SyntheticScenario s;
    s.length = 200;
    const QuantileGrid grid({0.1, 0.5, 0.9});
    const SyntheticData a = generate(s, grid);
    const SyntheticData b = generate(s, grid);
    EXPECT_EQ(a.actuals.values(), b.actuals.values());
    EXPECT_EQ(a.true_surface, b.true_surface);
    EXPECT_EQ(a.lag1, b.lag1);

    SyntheticScenario other = s;
    other.seed = 2;
    EXPECT_NE(generate(other, grid).actuals.values(), a.actuals.values());

    EXPECT_EQ(a.time.stamps()[0], 1451606400);
    EXPECT_EQ(a.time.stamps()[1] - a.time.stamps()[0], 3600);
    for (std::size_t t = 1; t < s.length; ++t)
        ASSERT_EQ(a.lag1[t], a.actuals.value(t - 1));
}

TEST(Generate, MedianSurfaceEqualsMeanPath) {
    SyntheticScenario s;
    s.length = 120;
    const QuantileGrid grid({0.25, 0.5, 0.75});
    for (NoiseFamily f : {NoiseFamily::gaussian, NoiseFamily::laplace, NoiseFamily::scaled_t}) {
        SyntheticScenario sc = s;
        sc.noise = f;
        sc.noise_params = f == NoiseFamily::scaled_t ? std::vector<double>{4.0, 5.0}
                                                     : std::vector<double>{5.0};
        const SyntheticData data = generate(sc, grid);
        for (std::size_t t = 0; t < sc.length; ++t) {
            ASSERT_EQ(data.true_surface[t * 3 + 1], data.mean_path[t]);
            ASSERT_LT(data.true_surface[t * 3 + 0], data.true_surface[t * 3 + 2]);
        }
    }
}

TEST(Generate, TinyNoiseTracksMeanPath) {
    SyntheticScenario s;
    s.length = 100;
    s.noise_params = {1e-12};
    const SyntheticData data = generate(s, QuantileGrid({0.5}));
    for (std::size_t t = 0; t < s.length; ++t)
        ASSERT_NEAR(data.actuals.value(t), data.mean_path[t], 1e-10);
}

TEST(BaseModels, RealizableTargetIsFitExactly) {
    // Hand-built data where y is exactly linear in the cycle features:
    // the per-level fits should all reach (numerically) zero pinball.
    SyntheticData data;
    const std::size_t T = 40;
    std::vector<std::int64_t> stamps(T);
    std::vector<double> y(T);
    data.grid = QuantileGrid({0.2, 0.5, 0.8});
    data.mean_path.resize(T);
    data.lag1.resize(T);
    data.sin_term.resize(T);
    data.cos_term.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        stamps[t] = static_cast<std::int64_t>(t);
        const double w = 2.0 * 3.14159265358979323846 * static_cast<double>(t) / 16.0;
        data.sin_term[t] = std::sin(w);
        data.cos_term[t] = std::cos(w);
        data.lag1[t] = 0.0;
        y[t] = 2.0 + 3.0 * data.sin_term[t] + 1.0 * data.cos_term[t];
        data.mean_path[t] = y[t];
    }
    data.time = TimeIndex(stamps);
    data.actuals = ActualSeries(data.time, y);

    const LinearQuantileModel model = fit_base(data, 0, T, BaseFeatures::cycle_only);
    for (double obj : model.objective_per_level) EXPECT_NEAR(obj, 0.0, 1e-7);
    const std::vector<double> fc = predict_base(model, data, 0, T);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < 3; ++k) ASSERT_NEAR(fc[t * 3 + k], y[t], 1e-6);
}

TEST(BaseModels, InterceptOnlyFitMatchesOrderStatisticOracle) {
    SyntheticScenario s;
    s.seed = 11;
    s.length = 101;
    const SyntheticData data = generate(s, QuantileGrid({0.5, 0.9}));
    const LinearQuantileModel model = fit_base(data, 0, s.length, BaseFeatures::const_only);

    // An intercept-only pinball fit always has a data point among its
    // optima, so brute force over data-point candidates is an oracle.
    for (std::size_t k = 0; k < 2; ++k) {
        const double q = data.grid.level(k);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.length; ++i) {
            double obj = 0.0;
            for (std::size_t t = 0; t < s.length; ++t)
                obj += pinball(data.actuals.value(i), data.actuals.value(t), q);
            best = std::min(best, obj);
        }
        EXPECT_NEAR(model.objective_per_level[k], best, 1e-9 * (1.0 + best));
        EXPECT_LE(model.objective_per_level[k], best + 1e-9);
    }
}

TEST(BaseModels, RangeValidation) {
    SyntheticScenario s;
    s.length = 50;
    const SyntheticData data = generate(s, QuantileGrid({0.5}));
    EXPECT_THROW(fit_base(data, 10, 10, BaseFeatures::const_only), ParameterError);
    EXPECT_THROW(fit_base(data, 0, 51, BaseFeatures::const_only), ParameterError);
    EXPECT_THROW(fit_base(data, 0, 2, BaseFeatures::cycle_only), ParameterError);
    const LinearQuantileModel m = fit_base(data, 0, 10, BaseFeatures::const_only);
    EXPECT_THROW(predict_base(m, data, 40, 40), ParameterError);
}

TEST(Pool, SingleMenuMatchesDirectFit) {
    SyntheticScenario s;
    s.seed = 3;
    s.length = 240;
    const QuantileGrid grid({0.1, 0.5, 0.9});
    const PoolResult pool = make_pool(s, grid, {BaseFeatures::lag_only});
    ASSERT_EQ(pool.panel.models(), 1u);
    EXPECT_EQ(pool.panel.model_ids()[0], "lag1");

    const SyntheticData data = generate(s, grid);
    const auto b = split_boundaries(s);
    const LinearQuantileModel model = fit_base(data, 0, b[0], BaseFeatures::lag_only);
    const std::vector<double> fc = predict_base(model, data, b[1], s.length);
    ASSERT_EQ(pool.panel.values(), fc);
    EXPECT_EQ(pool.combine_steps, b[2] - b[1]);
    EXPECT_EQ(pool.panel.steps(), s.length - b[1]);
    EXPECT_EQ(pool.true_surface.size(), (s.length - b[1]) * 3);
    for (std::size_t t = 0; t < pool.panel.steps(); ++t)
        ASSERT_EQ(pool.actuals.value(t), data.actuals.value(b[1] + t));
}

TEST(Pool, DuplicateMenusGetSuffixedIds) {
    SyntheticScenario s;
    s.length = 160;
    const QuantileGrid grid({0.5});
    const PoolResult pool = make_pool(s, grid, {BaseFeatures::cycle_only,
                                                BaseFeatures::cycle_only});
    ASSERT_EQ(pool.panel.models(), 2u);
    EXPECT_EQ(pool.panel.model_ids()[0], "cycle");
    EXPECT_EQ(pool.panel.model_ids()[1], "cycle#2");
    for (std::size_t t = 0; t < pool.panel.steps(); ++t)
        ASSERT_EQ(pool.panel.value(0, t, 0), pool.panel.value(1, t, 0));
}

TEST(Pool, DefaultMenusProduceDistinctForecasts) {
    SyntheticScenario s;
    s.seed = 7;
    s.length = 320;
    const QuantileGrid grid({0.25, 0.75});
    const PoolResult pool = make_pool(s, grid);
    ASSERT_EQ(pool.panel.models(), 3u);
    EXPECT_EQ(pool.panel.model_ids()[0], "lag1");
    EXPECT_EQ(pool.panel.model_ids()[1], "cycle");
    EXPECT_EQ(pool.panel.model_ids()[2], "lag1+cycle");
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b) {
            double gap = 0.0;
            for (std::size_t t = 0; t < pool.panel.steps(); ++t)
                for (std::size_t k = 0; k < 2; ++k)
                    gap += std::fabs(pool.panel.value(a, t, k) - pool.panel.value(b, t, k));
            EXPECT_GT(gap, 1.0) << "menus " << a << " and " << b;
        }
    EXPECT_THROW(make_pool(s, grid, {}), ParameterError);
}

TEST(Pool, NoBaseModelBeatsTheTrueSurface) {
    // On a long test span the true conditional quantile surface is the
    // pinball-optimal forecaster, so every estimated base model scores
    // at least as high up to sampling slack.
    SyntheticScenario s;
    s.seed = 13;
    s.length = 6000;
    const QuantileGrid grid({0.1, 0.5, 0.9});
    const PoolResult pool = make_pool(s, grid);
    const std::size_t test_begin = pool.combine_steps;
    const std::size_t steps = pool.panel.steps();
    const std::size_t Q = 3;

    double oracle = 0.0;
    for (std::size_t t = test_begin; t < steps; ++t)
        for (std::size_t k = 0; k < Q; ++k)
            oracle += pinball(pool.true_surface[t * Q + k], pool.actuals.value(t), grid.level(k));

    for (std::size_t n = 0; n < pool.panel.models(); ++n) {
        double score = 0.0;
        for (std::size_t t = test_begin; t < steps; ++t)
            for (std::size_t k = 0; k < Q; ++k)
                score += pinball(pool.panel.value(n, t, k), pool.actuals.value(t), grid.level(k));
        EXPECT_GE(score, oracle * 0.98) << pool.panel.model_ids()[n];
    }
}

TEST(Pool, HeavyTailFamiliesRunEndToEnd) {
    for (NoiseFamily f : {NoiseFamily::laplace, NoiseFamily::scaled_t}) {
        SyntheticScenario s;
        s.seed = 21;
        s.length = 400;
        s.noise = f;
        s.noise_params = f == NoiseFamily::scaled_t ? std::vector<double>{4.0, 5.0}
                                                    : std::vector<double>{5.0};
        const PoolResult pool = make_pool(s, QuantileGrid({0.1, 0.5, 0.9}));
        for (double v : pool.panel.values()) ASSERT_TRUE(std::isfinite(v));
        for (double v : pool.true_surface) ASSERT_TRUE(std::isfinite(v));
    }
}
