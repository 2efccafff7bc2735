#include <catch2/catch_amalgamated.hpp>

#include "rpk/optim.hpp"

using namespace rpk;

TEST_CASE("lr_at follows the step schedule") {
    CHECK(lr_at(0) == Catch::Approx(0.05));
    CHECK(lr_at(149) == Catch::Approx(0.05));
    CHECK(lr_at(150) == Catch::Approx(0.005));
    CHECK(lr_at(300) == Catch::Approx(0.0005));
    CHECK(lr_at(450) == Catch::Approx(0.00005));
    CHECK(lr_at(499) == Catch::Approx(0.00005));
    CHECK(lr_at(10, 0.1, 5) == Catch::Approx(0.001));
    CHECK_THROWS_AS(lr_at(-1), ConfigError);
    CHECK_THROWS_AS(lr_at(0, 0.05, 0), ConfigError);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
    Tensor p = Tensor::from_values(Shape{1, 1, 3}, {1.0, -2.0, 0.5}, true);
    Adam opt({p});
    p.zero_grad();
    for (int i = 0; i < 10; ++i) opt.step(0.05);
    CHECK(p.values() == std::vector<double>{1.0, -2.0, 0.5});
    CHECK(opt.step_count() == 10);

    // a parameter that never saw backward behaves the same
    Tensor q = Tensor::from_values(Shape{1, 1, 1}, {7.0}, true);
    Adam opt2({q});
    opt2.step(0.1);
    CHECK(q.values()[0] == 7.0);
}

TEST_CASE("adam first step is ~lr for unit gradient") {
    Tensor p = Tensor::from_values(Shape{1, 1, 1}, {0.0}, true);
    Adam opt({p});
    p.zero_grad();
    p.node()->grad[0] = 1.0;
    double lr = 0.05;
    opt.step(lr);
    // bias correction makes m_hat = v_hat = 1 -> step lr/(1+eps)
    CHECK(p.values()[0] == Catch::Approx(-lr / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam converges to |update| = lr under constant gradient") {
    Tensor p = Tensor::from_values(Shape{1, 1, 1}, {0.0}, true);
    Adam opt({p});
    double lr = 0.01;
    double prev = 0.0;
    double last_update = 0.0;
    for (int t = 0; t < 1000; ++t) {
        p.zero_grad();
        p.node()->grad[0] = 3.0;  // constant
        opt.step(lr);
        last_update = p.values()[0] - prev;
        prev = p.values()[0];
    }
    CHECK(std::abs(last_update) == Catch::Approx(lr).epsilon(1e-6));
}

TEST_CASE("adam rejects non-finite gradients") {
    Tensor p = Tensor::from_values(Shape{1, 1, 1}, {0.0}, true);
    Adam opt({p});
    p.zero_grad();
    p.node()->grad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(opt.step(0.05), NumericsError);
}

TEST_CASE("adam actually minimizes a quadratic") {
    Tensor p = Tensor::from_values(Shape{1, 1, 2}, {4.0, -3.0}, true);
    Adam opt({p});
    for (int t = 0; t < 2000; ++t) {
        opt.zero_grad();
        // d/dp of 0.5*||p - (1, 2)||^2
        p.node()->grad[0] = p.values()[0] - 1.0;
        p.node()->grad[1] = p.values()[1] - 2.0;
        opt.step(0.01);
    }
    CHECK(p.values()[0] == Catch::Approx(1.0).margin(1e-3));
    CHECK(p.values()[1] == Catch::Approx(2.0).margin(1e-3));
}
