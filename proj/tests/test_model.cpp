#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "etvbf/model.hpp"

using namespace etvbf;

TEST(CvScenario, Structure) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    EXPECT_EQ(m.n, 4);
    EXPECT_EQ(m.m, 2);
    Matrix F(4, 4);
    F << 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1;
    EXPECT_EQ(m.F(3), F);
    Matrix H(2, 4);
    H << 1, 0, 0, 0, 0, 1, 0, 0;
    EXPECT_EQ(m.H(3), H);
}

TEST(CvScenario, NoiseAtStepZero) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    const Matrix q = m.trueQ(0) / 6.5;
    Matrix shape(4, 4);
    shape << 1.0 / 3, 0, 0.5, 0, 0, 1.0 / 3, 0, 0.5, 0.5, 0, 1, 0, 0, 0.5, 0, 1;
    EXPECT_LT((q - shape).norm(), 1e-14);
    Matrix r(2, 2);
    r << 150, 75, 75, 150;
    EXPECT_LT((m.trueR(0) - r).norm(), 1e-12);
}

TEST(CvScenario, NoiseAtHalfPeriod) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    EXPECT_NEAR(m.trueQ(500)(3, 3), 5.5, 1e-12);
    EXPECT_NEAR(m.trueR(500)(0, 0), 50.0, 1e-12);
    EXPECT_NEAR(m.trueR(500)(0, 1), 25.0, 1e-12);
}

TEST(CvScenario, GeneralSamplingPeriod) {
    const ModelSpec m = build_cv_scenario(2.0, 500);
    EXPECT_NEAR(m.F(1)(0, 2), 2.0, 0.0);
    EXPECT_NEAR(m.trueQ(0)(0, 0) / 6.5, 8.0 / 3.0, 1e-14);
    EXPECT_NEAR(m.trueQ(0)(0, 2) / 6.5, 2.0, 1e-14);
    EXPECT_NEAR(m.trueQ(0)(2, 2) / 6.5, 2.0, 1e-14);
}

TEST(CvScenario, CovariancesStaySpd) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    for (int k = 0; k <= 1000; ++k) {
        EXPECT_NO_THROW(spd_factor(m.trueQ(k)));
        EXPECT_NO_THROW(spd_factor(m.trueR(k)));
    }
}

TEST(CvScenario, RejectsBadArguments) {
    EXPECT_THROW(build_cv_scenario(0.0, 500), std::invalid_argument);
    EXPECT_THROW(build_cv_scenario(1.0, 0), std::invalid_argument);
}

TEST(ScenarioDefaults, Values) {
    const ScenarioDefaults d = scenario_defaults();
    Vector x0(4);
    x0 << 100, 100, 10, 10;
    EXPECT_EQ(d.x0, x0);
    EXPECT_EQ(d.P0, Matrix(100.0 * Matrix::Identity(4, 4)));
    EXPECT_EQ(d.steps, 150);
}

namespace {

ModelSpec tiny_noise_model(double eps) {
    ModelSpec m = build_cv_scenario(1.0, 500);
    m.trueQ = [eps](int) -> Matrix { return eps * Matrix::Identity(4, 4); };
    m.trueR = [eps](int) -> Matrix { return eps * Matrix::Identity(2, 2); };
    return m;
}

}  // namespace

TEST(SimulateTruth, ZeroNoiseLimit) {
    const ModelSpec m = tiny_noise_model(1e-300);
    const ScenarioDefaults d = scenario_defaults();
    SeededRng rng(1);
    const Trajectory t = simulate_truth(m, d.x0, d.P0, 40, rng);
    ASSERT_EQ(t.steps(), 40);
    ASSERT_EQ(t.measurements.size(), t.states.size());
    Vector x = d.x0;
    for (int k = 1; k <= 40; ++k) {
        x = m.F(k) * x;
        EXPECT_LT((t.states[k - 1] - x).norm(), 1e-6);
        EXPECT_LT((t.measurements[k - 1] - m.H(k) * x).norm(), 1e-6);
    }
}

TEST(SimulateTruth, ExactZeroNoiseMeasurements) {
    ModelSpec m = tiny_noise_model(0.0);
    m.trueQ = [](int) -> Matrix { return Matrix::Identity(4, 4) * 0x1.0p-1074; };
    m.trueR = [](int) -> Matrix { return Matrix::Identity(2, 2) * 0x1.0p-1074; };
    const ScenarioDefaults d = scenario_defaults();
    SeededRng rng(3);
    const Trajectory t = simulate_truth(m, d.x0, d.P0, 10, rng);
    Vector x = d.x0;
    for (int k = 1; k <= 10; ++k) {
        x = m.F(k) * x;
        EXPECT_EQ(t.measurements[k - 1], m.H(k) * x);
    }
}

TEST(SimulateTruth, Deterministic) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    const ScenarioDefaults d = scenario_defaults();
    SeededRng a(42), b(42);
    const Trajectory ta = simulate_truth(m, d.x0, d.P0, d.steps, a);
    const Trajectory tb = simulate_truth(m, d.x0, d.P0, d.steps, b);
    EXPECT_EQ(ta.initial_estimate, tb.initial_estimate);
    for (int k = 0; k < d.steps; ++k) {
        EXPECT_EQ(ta.states[k], tb.states[k]);
        EXPECT_EQ(ta.measurements[k], tb.measurements[k]);
    }
}

TEST(SimulateTruth, ProcessNoiseCovariance) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    const ScenarioDefaults d = scenario_defaults();
    const int N = 500;
    std::vector<Vector> w;
    Vector mean = Vector::Zero(4);
    for (int t = 0; t < N; ++t) {
        SeededRng rng(1000 + t);
        const Trajectory tr = simulate_truth(m, d.x0, d.P0, 1, rng);
        w.push_back(tr.states[0] - m.F(1) * d.x0);
        mean += w.back();
    }
    mean /= N;
    Matrix c = Matrix::Zero(4, 4);
    for (const auto& v : w) c += (v - mean) * (v - mean).transpose();
    c /= (N - 1);
    EXPECT_LT((c - m.trueQ(1)).norm() / m.trueQ(1).norm(), 0.10);
}

TEST(SimulateTruth, InitialEstimateSpread) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    const ScenarioDefaults d = scenario_defaults();
    const int N = 2000;
    double var = 0.0;
    for (int t = 0; t < N; ++t) {
        SeededRng rng(5000 + t);
        const Trajectory tr = simulate_truth(m, d.x0, d.P0, 1, rng);
        EXPECT_EQ(tr.initial_state, d.x0);
        var += (tr.initial_estimate - d.x0).squaredNorm();
    }
    EXPECT_NEAR(var / N / 4.0, 100.0, 6.0);
}

TEST(SimulateTruth, Errors) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    const ScenarioDefaults d = scenario_defaults();
    SeededRng rng(1);
    EXPECT_THROW(simulate_truth(m, Vector::Zero(3), d.P0, 5, rng), std::invalid_argument);
    EXPECT_THROW(simulate_truth(m, d.x0, d.P0, 0, rng), std::invalid_argument);
    EXPECT_THROW(simulate_truth(m, d.x0, Matrix::Zero(4, 4), 5, rng), NotPositiveDefinite);
}

TEST(TrajectoryCsv, Layout) {
    const ModelSpec m = build_cv_scenario(1.0, 500);
    const ScenarioDefaults d = scenario_defaults();
    SeededRng rng(1);
    const Trajectory t = simulate_truth(m, d.x0, d.P0, 3, rng);
    std::ostringstream os;
    write_trajectory_csv(os, t);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "k,x1,x2,x3,x4,z1,z2");
    std::getline(is, line);
    EXPECT_EQ(line, "0,100,100,10,10,,");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 3);
}
