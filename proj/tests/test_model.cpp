#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "oracles.hpp"
#include "pih/hand.hpp"
#include "pih/mlp.hpp"
#include "pih/rng.hpp"

using namespace pih;
using namespace pih::hand;

TEST_CASE("mlp analytic gradient matches finite differences") {
    Mlp net(2, 8, 3, 42);
    Rng rng(1);
    const int n = 16;
    Eigen::MatrixXd x(n, 2), y(n, 3);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        x(i, 1) = rng.uniform(-1, 1);
        for (int j = 0; j < 3; ++j) y(i, j) = rng.uniform(-1, 1);
    }
    Eigen::VectorXd g = net.gradient(x, y);
    Eigen::VectorXd theta = net.parameters();
    // spot-check a deterministic spread of parameters
    for (int k = 0; k < net.parameter_count(); k += 7) {
        Eigen::VectorXd tp = theta, tm = theta;
        const double eps = 1e-6;
        tp[k] += eps;
        tm[k] -= eps;
        Mlp np = net, nm = net;
        np.set_parameters(tp);
        nm.set_parameters(tm);
        const double fd = (np.loss(x, y) - nm.loss(x, y)) / (2 * eps);
        const double scale = std::max({std::abs(fd), std::abs(g[k]), 1e-8});
        CHECK(std::abs(g[k] - fd) / scale < 1e-4);
    }
}

TEST_CASE("mlp training is deterministic and reduces the loss") {
    Rng rng(3);
    const int n = 400;
    Eigen::MatrixXd x(n, 2), y(n, 3);
    for (int i = 0; i < n; ++i) {
        const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
        x.row(i) << a, b;
        y.row(i) << 0.5 * a - b, a * b, std::sin(a);
    }
    Mlp m1(2, 16, 3, 7), m2(2, 16, 3, 7);
    Mlp::TrainConfig tc;
    tc.epochs = 60;
    tc.seed = 7;
    const double before = m1.loss(x, y);
    const double l1 = m1.train(x, y, tc);
    const double l2 = m2.train(x, y, tc);
    CHECK(l1 == l2);  // bitwise deterministic
    CHECK(l1 < 0.2 * before);
}

TEST_CASE("mlp save/load roundtrip") {
    Mlp net(2, 8, 3, 5);
    const std::string path = "test_mlp.txt";
    net.save(path);
    Mlp back = Mlp::load(path);
    Eigen::VectorXd in(2);
    in << 0.3, -0.7;
    CHECK((net.forward(in) - back.forward(in)).norm() < 1e-12);
    std::remove(path.c_str());
}

TEST_CASE("inverse model memorizes a constant buffer") {
    std::vector<TransitionRecord> buffer;
    TransitionRecord rec;
    rec.xdot_xy = Eigen::Vector2d(0.08, -0.05);
    rec.a_dot = Eigen::Vector3d(0.2, -0.1, 0.3);
    rec.triangle = {30, 30, 30};
    for (int i = 0; i < 1200; ++i) buffer.push_back(rec);
    InverseHandModel::FitOptions opt;
    opt.epochs = 30;
    auto model = InverseHandModel::fit(buffer, opt);
    Eigen::Vector3d pred = model.predict(rec.xdot_xy);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(pred[i] - rec.a_dot[i]) <= 0.05 * std::abs(rec.a_dot[i]) + 1e-3);
    }
}

TEST_CASE("inverse model fit requires a minimum buffer and clamps predictions") {
    std::vector<TransitionRecord> tiny(10);
    CHECK_THROWS_AS(InverseHandModel::fit(tiny), InvalidDimension);

    auto buffer = generate_dataset(4, 1500, 17);
    InverseHandModel::FitOptions opt;
    opt.epochs = 25;
    auto model = InverseHandModel::fit(buffer, opt);
    Eigen::Vector3d out = model.predict(Eigen::Vector2d(50.0, -50.0));  // far out of range
    for (int i = 0; i < 3; ++i) CHECK(std::abs(out[i]) <= kActuatorVelocityLimit + 1e-12);
    CHECK_THROWS_AS(model.predict(Eigen::Vector2d(std::nan(""), 0.0)), InvalidDimension);
}

TEST_CASE("held-out loss stays close to training loss on a small buffer") {
    auto buffer = generate_dataset(6, 3000, 23);
    std::vector<TransitionRecord> train, held;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        (i % 5 == 0 ? held : train).push_back(buffer[i]);
    }
    InverseHandModel::FitOptions opt;
    opt.epochs = 60;
    auto model = InverseHandModel::fit(train, opt);

    auto mse = [&model](const std::vector<TransitionRecord>& recs) {
        double acc = 0;
        for (const auto& r : recs) acc += (model.predict(r.xdot_xy) - r.a_dot).squaredNorm();
        return acc / recs.size();
    };
    const double lt = mse(train);
    const double lh = mse(held);
    CHECK(lh <= 2.0 * lt);
}

TEST_CASE("inverse model save/load and metadata") {
    auto buffer = generate_dataset(3, 1200, 31);
    InverseHandModel::FitOptions opt;
    opt.epochs = 20;
    auto model = InverseHandModel::fit(buffer, opt);
    CHECK(model.dataset_hash() == hash_dataset(buffer));
    CHECK(std::isfinite(model.final_loss()));
    CHECK(!model.loss_curve().empty());

    const std::string path = "test_ihm.txt";
    model.save(path);
    auto back = InverseHandModel::load(path);
    Eigen::Vector2d probe(0.03, -0.02);
    CHECK((model.predict(probe) - back.predict(probe)).norm() < 1e-12);
    CHECK(back.dataset_hash() == model.dataset_hash());
    std::remove(path.c_str());
}

TEST_CASE("dataset file roundtrip") {
    auto buffer = generate_dataset(2, 200, 13);
    save_dataset(buffer, "test_dataset.txt");
    auto back = load_dataset("test_dataset.txt");
    REQUIRE(back.size() == buffer.size());
    CHECK(hash_dataset(back) == hash_dataset(buffer));
    std::remove("test_dataset.txt");
}
