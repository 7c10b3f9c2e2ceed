#include "oracles.hpp"
#include "skelrefine/errors.hpp"

#include <doctest.h>

using namespace skelrefine;
using namespace skelrefine::drnn;

TEST_SUITE("drnn") {

TEST_CASE("config validation") {
    DrnnConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(DrnnConfig::position_network().window_length == 7);
    CHECK(DrnnConfig::velocity_network().window_length == 20);
    c.recurrent_layer = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.recurrent_layer = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DrnnConfig{};
    c.window_length = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DrnnConfig{};
    c.hidden_sizes = {};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("parameter shapes follow the config") {
    DrnnConfig c;
    c.hidden_sizes = {5, 6, 7};
    c.recurrent_layer = 2;
    const auto p = DrnnParams::glorot(c);
    REQUIRE(p.layers() == 3);
    CHECK(p.U[0].rows() == 48);
    CHECK(p.U[0].cols() == 5);
    CHECK(p.U[1].rows() == 5);
    CHECK(p.U[2].cols() == 7);
    CHECK(p.W.rows() == 6);
    CHECK(p.W.cols() == 6);
    CHECK(p.V.rows() == 7);
    CHECK(p.V.cols() == 48);
    CHECK(p.parameter_count() == 48 * 5 + 5 + 5 * 6 + 6 + 6 * 7 + 7 + 36 + 7 * 48 + 48);
    CHECK_NOTHROW(p.check_shapes(c));
    c.hidden_sizes = {5, 6, 8};
    CHECK_THROWS_AS(p.check_shapes(c), DimensionError);
}

TEST_CASE("glorot init is seeded and bounded") {
    DrnnConfig c;
    c.hidden_sizes = {16, 16};
    c.seed = 42;
    const auto a = DrnnParams::glorot(c);
    const auto b = DrnnParams::glorot(c);
    CHECK(a.flatten() == b.flatten());
    c.seed = 43;
    CHECK(DrnnParams::glorot(c).flatten() != a.flatten());
    const double bound = std::sqrt(6.0 / (48 + 16));
    CHECK(a.U[0].cwiseAbs().maxCoeff() <= bound);
    CHECK(a.b[0].isZero(0.0));
}

TEST_CASE("flatten and assign are inverse") {
    const auto n = oracle::random_tiny_net(3);
    DrnnParams q = DrnnParams::zeros(n.cfg);
    q.assign(n.params.flatten());
    CHECK(q.flatten() == n.params.flatten());
    CHECK_THROWS_AS(q.assign(Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("forward matches a scalar-loop oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto n = oracle::random_tiny_net(seed);
        const auto got = forward(n.params, n.batch.inputs[0]).outputs;
        const auto want = oracle::forward(n.params, n.batch.inputs[0]);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("single hidden layer with W = 0 is a two-layer feedforward net") {
    DrnnConfig c;
    c.input_dim = 4;
    c.output_dim = 3;
    c.hidden_sizes = {6};
    c.recurrent_layer = 1;
    c.seed = 5;
    auto p = DrnnParams::glorot(c);
    p.W.setZero();
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    const MatrixXd x = MatrixXd::NullaryExpr(4, 5, [&] { return g(rng); });
    const auto y = forward(p, x).outputs;
    for (int t = 0; t < 5; ++t) {
        // Each step sees only its own input.
        const VectorXd h = (p.U[0].transpose() * x.col(t) + p.b[0]).cwiseMax(0.0);
        const VectorXd want = p.V.transpose() * h + p.c;
        CHECK((y.col(t) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("hidden state carries across calls") {
    const auto n = oracle::random_tiny_net(11);
    const MatrixXd& x = n.batch.inputs[0];
    const auto whole = forward(n.params, x);
    const Eigen::Index split = x.cols() / 2;
    const auto first = forward(n.params, x.leftCols(split));
    const auto second = forward(n.params, x.rightCols(x.cols() - split), first.final_hidden);
    CHECK((second.outputs - whole.outputs.rightCols(x.cols() - split)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((second.final_hidden - whole.final_hidden).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward rejects mismatched input") {
    const auto n = oracle::random_tiny_net(1);
    CHECK_THROWS_AS(forward(n.params, MatrixXd::Zero(n.cfg.input_dim + 1, 2)), DimensionError);
    CHECK_THROWS_AS(forward(n.params, MatrixXd::Zero(n.cfg.input_dim, 0)), DimensionError);
    CHECK_THROWS_AS(forward(n.params, MatrixXd::Zero(n.cfg.input_dim, 2), VectorXd::Zero(99)), DimensionError);
}

TEST_CASE("BPTT gradient matches central finite differences") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto n = oracle::random_tiny_net(seed);
        const auto lg = loss_and_gradient(n.params, n.batch);
        const VectorXd analytic = lg.gradient.flatten();
        const VectorXd fd = oracle::finite_difference_gradient(n.params, n.batch);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < fd.size(); ++i)
            worst = std::max(worst, std::abs(analytic(i) - fd(i)) / std::max(1.0, std::abs(fd(i))));
        CHECK_MESSAGE(worst < 1e-5, "seed " << seed);
        CHECK(lg.loss == doctest::Approx(loss(n.params, n.batch)).epsilon(1e-14));
    }
}

TEST_CASE("repeating every window doubles loss and gradient") {
    auto n = oracle::random_tiny_net(21);
    SUBCASE("single window, bit-exact") {
        n.batch.inputs.resize(1);
        n.batch.targets.resize(1);
        TrainingBatch twice = n.batch;
        twice.append(n.batch);
        const auto one = loss_and_gradient(n.params, n.batch);
        const auto two = loss_and_gradient(n.params, twice);
        CHECK(two.loss == 2.0 * one.loss);
        CHECK(two.gradient.flatten() == 2.0 * one.gradient.flatten());
    }
    SUBCASE("several windows, up to summation order") {
        TrainingBatch twice = n.batch;
        twice.append(n.batch);
        const auto one = loss_and_gradient(n.params, n.batch);
        const auto two = loss_and_gradient(n.params, twice);
        CHECK(two.loss == doctest::Approx(2.0 * one.loss).epsilon(1e-14));
        CHECK((two.gradient.flatten() - 2.0 * one.gradient.flatten()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("ReLU subgradient at zero is zero") {
    DrnnConfig c;
    c.input_dim = 1;
    c.output_dim = 1;
    c.hidden_sizes = {1};
    c.recurrent_layer = 1;
    c.window_length = 2;
    auto p = DrnnParams::zeros(c);
    p.U[0](0, 0) = 1.0;
    p.V(0, 0) = 1.0;
    TrainingBatch b;
    b.inputs.push_back(MatrixXd::Zero(1, 2));  // pre-activation exactly 0
    b.targets.push_back(MatrixXd::Ones(1, 2));
    const auto g = loss_and_gradient(p, b).gradient;
    CHECK(g.U[0](0, 0) == 0.0);
    CHECK(g.b[0](0) == 0.0);
    CHECK(g.c(0) == -4.0);
}

TEST_CASE("make_windows counts frames - length + 1 per sequence") {
    std::vector<MatrixXd> in{MatrixXd::Random(3, 10), MatrixXd::Random(3, 7), MatrixXd::Random(3, 4)};
    const auto b = make_windows(in, in, 7);
    CHECK(b.size() == 4 + 1 + 0);
    CHECK(b.inputs[1] == in[0].middleCols(1, 7));
    CHECK(b.inputs[4] == in[1]);
    std::vector<MatrixXd> bad{MatrixXd::Random(3, 9)};
    CHECK_THROWS_AS(make_windows(in, bad, 7), DimensionError);
}

TEST_CASE("batch validation") {
    TrainingBatch b;
    CHECK_THROWS_AS(b.validate(2, 2), DataError);
    b.inputs.push_back(MatrixXd::Zero(2, 3));
    b.targets.push_back(MatrixXd::Zero(2, 4));
    CHECK_THROWS_AS(b.validate(2, 2), DimensionError);
}

}
