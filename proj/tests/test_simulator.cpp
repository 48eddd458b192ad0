#include <sstream>

#include <gtest/gtest.h>

#include "secest/simulator.hpp"
#include "support.hpp"

using namespace secest;

namespace {

struct Pendulum {
    SystemModel model = fixtures::pendulum();
    SpectralDesign design = build_spectral_design(model);
    SensorDecomposition dec = build_decomposition(model, design);
};

const Pendulum& pendulum()
{
    static const Pendulum p;
    return p;
}

AttackSpec sensor4(AttackKind kind, double magnitude, long start = 0)
{
    AttackSpec a;
    a.support = {3};
    a.kind = kind;
    a.magnitude = magnitude;
    a.start_step = start;
    return a;
}

SimulationOptions short_run(int horizon = 200, std::uint64_t seed = 1)
{
    SimulationOptions o;
    o.horizon = horizon;
    o.seed = seed;
    return o;
}

}  // namespace

TEST(Attack, ParseKinds)
{
    EXPECT_EQ(parse_attack_kind("ramp"), AttackKind::ramp);
    EXPECT_EQ(to_string(AttackKind::uniform), "uniform");
    EXPECT_THROW(parse_attack_kind("sine"), std::invalid_argument);
}

TEST(Simulate, PairedNoiseAndMeasurementIdentity)
{
    const auto& p = pendulum();
    const auto clean = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run());
    const auto attacked = simulate(p.model, p.design, p.dec, sensor4(AttackKind::uniform, M_PI / 2), 5.0, short_run());
    ASSERT_EQ(clean.steps.size(), attacked.steps.size());
    for (size_t k = 0; k < clean.steps.size(); ++k) {
        EXPECT_EQ(clean.steps[k].z, attacked.steps[k].z);
        EXPECT_EQ(clean.steps[k].x, attacked.steps[k].x);
        const auto& s = attacked.steps[k];
        EXPECT_EQ(s.y, s.z + s.a);
        EXPECT_EQ(s.a.head(3), Vector::Zero(3));
        EXPECT_LT(std::abs(s.a(3)), M_PI / 2);
        EXPECT_EQ(clean.steps[k].a, Vector::Zero(4));
    }
}

TEST(Simulate, AttackShapes)
{
    const auto& p = pendulum();
    const auto ramp = simulate(p.model, p.design, p.dec, sensor4(AttackKind::ramp, 0.01, 20), 5.0, short_run(60));
    for (const auto& s : ramp.steps) EXPECT_DOUBLE_EQ(s.a(3), s.k < 20 ? 0.0 : 0.01 * static_cast<double>(s.k - 20));
    const auto c = simulate(p.model, p.design, p.dec, sensor4(AttackKind::constant, 0.7), 5.0, short_run(30));
    for (const auto& s : c.steps) EXPECT_EQ(s.a(3), 0.7);
}

TEST(Simulate, Deterministic)
{
    const auto& p = pendulum();
    const auto a = simulate(p.model, p.design, p.dec, sensor4(AttackKind::uniform, 1.0), 2.0, short_run(150, 7));
    const auto b = simulate(p.model, p.design, p.dec, sensor4(AttackKind::uniform, 1.0), 2.0, short_run(150, 7));
    std::ostringstream sa, sb;
    write_trace_csv(sa, a);
    write_trace_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    const auto c = simulate(p.model, p.design, p.dec, sensor4(AttackKind::uniform, 1.0), 2.0, short_run(150, 8));
    EXPECT_NE(a.steps.back().x, c.steps.back().x);
}

TEST(Simulate, NoiseFreeFromRestHasZeroError)
{
    const auto& p = pendulum();
    SystemModel quiet = p.model;
    quiet.Q.setZero();
    quiet.R.setZero();
    quiet.Sigma.setZero();
    auto opts = short_run(100);
    opts.initial_state = Vector::Zero(4);
    const auto t = simulate(quiet, p.design, p.dec, AttackSpec{}, 5.0, opts);
    const auto m = mse(t, 0);
    EXPECT_EQ(m.kalman, 0.0);
    EXPECT_EQ(m.secure, 0.0);
    EXPECT_EQ(m.ls, 0.0);
}

TEST(Simulate, SecureEstimateRejectsSensorFourAttack)
{
    const auto& p = pendulum();
    auto opts = short_run(400);
    opts.initial_state = p.model.state_basis.fullPivLu().solve(Vector{{0.0, 1.0, 0.0, 1.0}});
    const auto t = simulate(p.model, p.design, p.dec, sensor4(AttackKind::uniform, M_PI / 2), 5.0, opts);
    const auto m = mse(t, 50);
    EXPECT_LT(m.secure, 2.5);
    EXPECT_GT(m.kalman, 5.0);
    EXPECT_EQ(t.nonconverged_steps(), 0);
}

TEST(Mse, BurnInAndReportingBasis)
{
    const auto& p = pendulum();
    const auto t = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(120));
    const auto m = mse(t, 20);
    EXPECT_EQ(m.samples, 100);
    double direct = 0.0;
    for (const auto& s : t.steps)
        if (s.k >= 20) direct += (p.model.state_basis * (s.xhat_kalman - s.x)).squaredNorm();
    EXPECT_NEAR(m.kalman, direct / 100.0, 1e-12 * direct);
    EXPECT_NEAR(m.kalman_per_state.sum(), m.kalman, 1e-12 * m.kalman);
    EXPECT_NEAR(m.ls, m.kalman, 1e-6 * m.kalman);
}

TEST(Gap, ZeroWithoutAttackAndMismatchRejected)
{
    const auto& p = pendulum();
    const auto a = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(80));
    const auto b = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(80));
    const auto g = security_gap(a, b);
    EXPECT_EQ(g.kalman_max, 0.0);
    EXPECT_EQ(g.secure_max, 0.0);
    const auto other = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(80, 2));
    EXPECT_THROW(security_gap(a, other), std::invalid_argument);
    EXPECT_THROW(security_gap(a, simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(81))),
                 std::invalid_argument);
}

TEST(Gap, RampBoundedForSecureDivergentForKalman)
{
    const auto& p = pendulum();
    const auto clean = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(600));
    const auto ramp = simulate(p.model, p.design, p.dec, sensor4(AttackKind::ramp, 0.01), 5.0, short_run(600));
    const auto g = security_gap(clean, ramp);
    EXPECT_GT(g.kalman.back(), 4.0 * g.kalman[100]);
    double early = 0.0, late = 0.0;
    for (size_t k = 100; k <= 200; ++k) early = std::max(early, g.secure[k]);
    for (size_t k = 100; k <= 500; ++k) late = std::max(late, g.secure[k]);
    EXPECT_LE(late, 2.0 * early);
}

TEST(Sweep, RowsColumnsAndThreadInvariance)
{
    const auto& p = pendulum();
    SweepOptions o;
    o.horizon = 120;
    o.trials = 3;
    o.threads = 1;
    const std::vector<double> gammas = {2.0, 20.0};
    const auto one = sweep_gamma(p.model, p.design, p.dec, gammas, sensor4(AttackKind::uniform, M_PI / 2), o);
    o.threads = 4;
    const auto four = sweep_gamma(p.model, p.design, p.dec, gammas, sensor4(AttackKind::uniform, M_PI / 2), o);
    std::ostringstream a, b;
    write_sweep_csv(a, one);
    write_sweep_csv(b, four);
    EXPECT_EQ(a.str(), b.str());
    ASSERT_EQ(one.size(), 2u);
    EXPECT_EQ(one[0].mse_kalman_no_attack, one[1].mse_kalman_no_attack);
    EXPECT_LT(one[0].mse_secure_attack, one[0].mse_kalman_attack);

    std::istringstream in(a.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("sweep_value,mse_secure_no_attack,mse_secure_attack,mse_kalman_no_attack,mse_kalman_attack", 0),
              0u);

    const auto mags = sweep_attack_magnitude(p.model, p.design, p.dec, {0.0, 1.0, 2.0}, 5.0,
                                             sensor4(AttackKind::uniform, 0.0), o);
    ASSERT_EQ(mags.size(), 3u);
    EXPECT_EQ(mags[0].mse_secure_no_attack, mags[2].mse_secure_no_attack);
    EXPECT_LT(mags[0].mse_kalman_attack, mags[2].mse_kalman_attack);
}

TEST(TraceCsv, HeaderAndRowCount)
{
    const auto& p = pendulum();
    const auto t = simulate(p.model, p.design, p.dec, AttackSpec{}, 5.0, short_run(10));
    std::ostringstream os;
    write_trace_csv(os, t);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("k,x_1,", 0), 0u);
    EXPECT_NE(line.find("xhat_sec_4"), std::string::npos);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 10);
}
