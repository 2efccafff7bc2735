#include <catch2/catch_amalgamated.hpp>

#include "gradcheck.hpp"
#include "rpk/tensor.hpp"

using namespace rpk;
using rpk::testing::gradcheck;
using rpk::testing::random_vec;
using rpk::testing::weighted_sum;

TEST_CASE("conv1d output length and basic values") {
    // L=10, k=4, s=2, p=1 -> 5
    Tensor x = Tensor::from_values(Shape{1, 1, 10}, std::vector<double>(10, 1.0));
    Tensor w = Tensor::from_values(Shape{1, 1, 4}, {1, 1, 1, 1});
    Tensor b = Tensor::zeros(Shape{1, 1, 1});
    CHECK(conv1d(x, w, b, 2, 1).shape() == Shape{1, 1, 5});

    // identity: k=1, s=1, p=0, weight 1
    Tensor xr = Tensor::from_values(Shape{1, 1, 6}, {1, -2, 3, 0.5, 0, 4});
    Tensor wi = Tensor::from_values(Shape{1, 1, 1}, {1.0});
    CHECK(conv1d(xr, wi, b, 1, 0).values() == xr.values());

    // sliding dot product
    Tensor x4 = Tensor::from_values(Shape{1, 1, 4}, {1, 2, 3, 4});
    Tensor w2 = Tensor::from_values(Shape{1, 1, 2}, {1, 1});
    auto y = conv1d(x4, w2, b, 1, 0);
    CHECK(y.values() == std::vector<double>{3, 5, 7});
}

TEST_CASE("conv1d shape errors") {
    Tensor x = Tensor::zeros(Shape{1, 2, 10});
    Tensor w = Tensor::zeros(Shape{4, 3, 3});
    Tensor b = Tensor::zeros(Shape{1, 4, 1});
    CHECK_THROWS_AS(conv1d(x, w, b, 1, 1), ShapeError);  // channel mismatch

    Tensor x2 = Tensor::zeros(Shape{1, 1, 2});
    Tensor w5 = Tensor::zeros(Shape{1, 1, 5});
    Tensor b1 = Tensor::zeros(Shape{1, 1, 1});
    CHECK_THROWS_AS(conv1d(x2, w5, b1, 1, 1), ShapeError);  // padded length < kernel
}

TEST_CASE("conv1d_transpose length and kernel stamping") {
    // L=5, k=4, s=2, p=1 -> 10 (inverse of the conv1d length example)
    Tensor x = Tensor::zeros(Shape{1, 1, 5});
    Tensor w = Tensor::zeros(Shape{1, 1, 4});
    Tensor b = Tensor::zeros(Shape{1, 1, 1});
    CHECK(conv1d_transpose(x, w, b, 2, 1).shape() == Shape{1, 1, 10});

    Tensor x1 = Tensor::from_values(Shape{1, 1, 1}, {1.0});
    Tensor w2 = Tensor::from_values(Shape{1, 1, 2}, {1, 1});
    auto y = conv1d_transpose(x1, w2, b, 1, 0);
    CHECK(y.values() == std::vector<double>{1, 1});
}

TEST_CASE("conv and transpose are adjoint under a shared weight") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        int64_t Ci = rng.uniform_int(1, 3), Co = rng.uniform_int(1, 3);
        int64_t K = std::vector<int64_t>{1, 4, 15, 17, 19, 21}[static_cast<size_t>(rng.uniform_int(0, 5))];
        int64_t s = rng.uniform_int(1, 2), p = rng.uniform_int(0, 2);
        int64_t L = K + rng.uniform_int(2, 30);
        // transpose length matches only when the conv spec divides evenly
        L += (s - (L + 2 * p - K) % s) % s;
        int64_t Lo = (L + 2 * p - K) / s + 1;
        if (Lo < 1) continue;
        Tensor x = Tensor::from_values(Shape{2, Ci, L}, random_vec(rng, 2 * Ci * L));
        Tensor w = Tensor::from_values(Shape{Co, Ci, K}, random_vec(rng, Co * Ci * K));
        Tensor zb_o = Tensor::zeros(Shape{1, Co, 1});
        Tensor zb_i = Tensor::zeros(Shape{1, Ci, 1});
        Tensor y = Tensor::from_values(Shape{2, Co, Lo}, random_vec(rng, 2 * Co * Lo));

        auto cx = conv1d(x, w, zb_o, s, p);
        // transpose with the same buffer read in (Ci_t=Co, Co_t=Ci, K) layout
        auto ty = conv1d_transpose(y, w, zb_i, s, p);
        double lhs = 0.0, rhs = 0.0;
        for (size_t i = 0; i < cx.values().size(); ++i) lhs += cx.values()[i] * y.values()[i];
        for (size_t i = 0; i < ty.values().size(); ++i) rhs += ty.values()[i] * x.values()[i];
        REQUIRE(std::abs(lhs - rhs) <= 1e-8 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
}

TEST_CASE("conv1d_transpose output_padding and errors") {
    Tensor x = Tensor::zeros(Shape{1, 1, 5});
    Tensor w = Tensor::zeros(Shape{1, 1, 4});
    Tensor b = Tensor::zeros(Shape{1, 1, 1});
    CHECK(conv1d_transpose(x, w, b, 2, 1, 1).shape().d2 == 11);
    CHECK_THROWS_AS(conv1d_transpose(x, w, b, 2, 1, 2), ConfigError);  // output_padding >= stride
    Tensor k9 = Tensor::zeros(Shape{1, 1, 9});
    Tensor x1 = Tensor::zeros(Shape{1, 1, 1});
    CHECK_THROWS_AS(conv1d_transpose(x1, k9, b, 1, 5), ShapeError);  // negative length
}

TEST_CASE("leaky_relu values") {
    Tensor x = Tensor::from_values(Shape{1, 1, 3}, {3.0, -1.0, 0.0});
    auto y = leaky_relu(x, 0.2);
    CHECK(y.values() == std::vector<double>{3.0, -0.2, 0.0});
}

TEST_CASE("concat_channels layout and zero-channel identity") {
    Rng rng(1);
    Tensor a = Tensor::from_values(Shape{1, 2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor c = Tensor::from_values(Shape{1, 3, 3}, random_vec(rng, 9));
    auto y = concat_channels(a, c);
    CHECK(y.shape() == Shape{1, 5, 3});
    CHECK(y.at(0, 0, 1) == 2);
    CHECK(y.at(0, 2, 0) == c.at(0, 0, 0));

    Tensor empty = Tensor::zeros(Shape{1, 0, 3});
    CHECK(concat_channels(a, empty).values() == a.values());

    Tensor wrong = Tensor::zeros(Shape{1, 1, 4});
    CHECK_THROWS_AS(concat_channels(a, wrong), ShapeError);
}

TEST_CASE("smooth_l1 exact values per both branches") {
    auto val = [](double diff) {
        Tensor p = Tensor::scalar(0.0);
        Tensor t = Tensor::scalar(diff);
        return smooth_l1(p, t).item();
    };
    CHECK(val(0.0) == 0.0);
    CHECK(val(2.0) == Catch::Approx(1.5).epsilon(1e-15));
    CHECK(val(0.5) == Catch::Approx(0.125).epsilon(1e-15));
    CHECK(val(-2.0) == Catch::Approx(1.5).epsilon(1e-15));

    Tensor p = Tensor::zeros(Shape{1, 1, 4});
    Tensor t = Tensor::zeros(Shape{1, 1, 3});
    CHECK_THROWS_AS(smooth_l1(p, t), ShapeError);
}

TEST_CASE("smooth_l1 is C1 at |diff| = 1") {
    // both branch values and derivatives agree at the seam
    auto quad = [](double d) { return 0.5 * d * d; };
    auto lin = [](double d) { return std::abs(d) - 0.5; };
    CHECK(std::abs(quad(1.0) - lin(1.0)) < 1e-12);
    CHECK(std::abs(quad(-1.0) - lin(-1.0)) < 1e-12);
    auto dquad = [](double d) { return d; };
    auto dlin = [](double d) { return d > 0 ? 1.0 : -1.0; };
    CHECK(std::abs(dquad(1.0) - dlin(1.0)) < 1e-12);
    CHECK(std::abs(dquad(-1.0) - dlin(-1.0)) < 1e-12);
}

TEST_CASE("smooth_l1 gradient branches") {
    // |diff| >= 1 -> dL/dpred = +-1/N under mean reduction
    const int64_t N = 8;
    Tensor pred = Tensor::from_values(Shape{1, 1, N}, std::vector<double>(N, 0.0), true);
    std::vector<double> tv(N);
    for (int64_t i = 0; i < N; ++i) tv[static_cast<size_t>(i)] = i % 2 == 0 ? 2.0 : -3.0;
    Tensor target = Tensor::from_values(Shape{1, 1, N}, tv);
    auto loss = smooth_l1(pred, target);
    loss.backward();
    for (int64_t i = 0; i < N; ++i) {
        double expect = (i % 2 == 0 ? -1.0 : 1.0) / static_cast<double>(N);
        CHECK(pred.grad()[static_cast<size_t>(i)] == Catch::Approx(expect).epsilon(1e-14));
    }

    Tensor pred0 = Tensor::from_values(Shape{1, 1, N}, tv, true);
    auto loss0 = smooth_l1(pred0, target);
    loss0.backward();
    for (double g : pred0.grad()) CHECK(g == 0.0);
}

TEST_CASE("batch_norm train statistics, affine, eval identity") {
    Rng rng(23);
    Tensor x = Tensor::from_values(Shape{4, 3, 7}, random_vec(rng, 4 * 3 * 7, -3.0, 5.0));
    auto st = BatchNormState::make(3);

    auto y = batch_norm(x, st);
    const int64_t N = 4 * 7;
    for (int64_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int64_t b = 0; b < 4; ++b)
            for (int64_t l = 0; l < 7; ++l) mean += y.at(b, c, l);
        mean /= N;
        for (int64_t b = 0; b < 4; ++b)
            for (int64_t l = 0; l < 7; ++l) var += (y.at(b, c, l) - mean) * (y.at(b, c, l) - mean);
        var /= N;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-5);
    }

    // affine on standardized input
    auto st2 = BatchNormState::make(1);
    st2.gamma.values_mut()[0] = 2.0;
    st2.beta.values_mut()[0] = 3.0;
    Tensor xs = Tensor::from_values(Shape{1, 1, 100}, random_vec(rng, 100, -2.0, 2.0));
    auto y2 = batch_norm(xs, st2);
    double m2 = 0.0, v2 = 0.0;
    for (double v : y2.values()) m2 += v;
    m2 /= 100.0;
    for (double v : y2.values()) v2 += (v - m2) * (v - m2);
    v2 /= 100.0;
    CHECK(m2 == Catch::Approx(3.0).margin(1e-9));
    CHECK(std::sqrt(v2) == Catch::Approx(2.0).margin(1e-5));

    // eval with running mean 0 / var 1 and identity affine passes through
    auto st3 = BatchNormState::make(2);
    st3.training = false;
    st3.eps = 0.0;
    Tensor xe = Tensor::from_values(Shape{1, 2, 5}, random_vec(rng, 10));
    auto ye = batch_norm(xe, st3);
    for (size_t i = 0; i < xe.values().size(); ++i) CHECK(ye.values()[i] == Catch::Approx(xe.values()[i]));

    // single-element reduction in train mode
    auto st4 = BatchNormState::make(1);
    Tensor x1 = Tensor::zeros(Shape{1, 1, 1});
    CHECK_THROWS_AS(batch_norm(x1, st4), InputError);
}

TEST_CASE("batch_norm updates running stats with momentum") {
    auto st = BatchNormState::make(1);
    st.momentum = 0.5;
    Tensor x = Tensor::from_values(Shape{1, 1, 4}, {1, 3, 1, 3});  // mean 2, biased var 1
    batch_norm(x, st);
    CHECK(st.running_mean[0] == Catch::Approx(0.5 * 0.0 + 0.5 * 2.0));
    CHECK(st.running_var[0] == Catch::Approx(0.5 * 1.0 + 0.5 * (1.0 * 4.0 / 3.0)));
}

TEST_CASE("backward requires scalar and accumulates") {
    Tensor x = Tensor::from_values(Shape{1, 1, 3}, {1, 2, 3}, true);
    CHECK_THROWS_AS(leaky_relu(x).backward(), UsageError);

    std::vector<double> w = {0.5, -1.0, 2.0};
    auto loss = weighted_sum(x, w);
    loss.backward();
    loss.backward();  // accumulates without reset
    for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == Catch::Approx(2.0 * w[i]));
    x.zero_grad();
    auto loss2 = weighted_sum(x, w);
    loss2.backward();
    for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == Catch::Approx(w[i]));
}

TEST_CASE("no-grad mode records nothing") {
    Tensor x = Tensor::from_values(Shape{1, 1, 4}, {1, -1, 2, -2}, true);
    autodiff::NoGradGuard ng;
    auto y = leaky_relu(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("gradcheck: conv1d over randomized shapes") {
    Rng rng(101);
    const std::vector<int64_t> kernels = {1, 4, 15, 17, 19, 21};
    for (int trial = 0; trial < 25; ++trial) {
        int64_t K = kernels[static_cast<size_t>(rng.uniform_int(0, 5))];
        int64_t s = rng.uniform_int(1, 2);
        int64_t p = rng.uniform_int(0, (K - 1) / 2 + 1);
        int64_t B = rng.uniform_int(1, 2), Ci = rng.uniform_int(1, 3), Co = rng.uniform_int(1, 3);
        int64_t L = K + rng.uniform_int(1, 12);
        Tensor x = Tensor::from_values(Shape{B, Ci, L}, random_vec(rng, B * Ci * L), true);
        Tensor w = Tensor::from_values(Shape{Co, Ci, K}, random_vec(rng, Co * Ci * K), true);
        Tensor b = Tensor::from_values(Shape{1, Co, 1}, random_vec(rng, Co), true);
        int64_t Lo = (L + 2 * p - K) / s + 1;
        auto ws = random_vec(rng, B * Co * Lo);
        double err = gradcheck({x, w, b}, [&]() { return weighted_sum(conv1d(x, w, b, s, p), ws); });
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("gradcheck: conv1d_transpose over randomized shapes") {
    Rng rng(202);
    const std::vector<int64_t> kernels = {1, 4, 15, 17, 19, 21};
    for (int trial = 0; trial < 25; ++trial) {
        int64_t K = kernels[static_cast<size_t>(rng.uniform_int(0, 5))];
        int64_t s = rng.uniform_int(1, 2);
        int64_t p = rng.uniform_int(0, (K - 1) / 2 + 1);
        int64_t B = rng.uniform_int(1, 2), Ci = rng.uniform_int(1, 3), Co = rng.uniform_int(1, 3);
        int64_t L = rng.uniform_int(3, 14);
        int64_t Lo = (L - 1) * s - 2 * p + K;
        if (Lo < 1) continue;
        Tensor x = Tensor::from_values(Shape{B, Ci, L}, random_vec(rng, B * Ci * L), true);
        Tensor w = Tensor::from_values(Shape{Ci, Co, K}, random_vec(rng, Ci * Co * K), true);
        Tensor b = Tensor::from_values(Shape{1, Co, 1}, random_vec(rng, Co), true);
        auto ws = random_vec(rng, B * Co * Lo);
        double err = gradcheck({x, w, b}, [&]() { return weighted_sum(conv1d_transpose(x, w, b, s, p), ws); });
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("gradcheck: batch_norm train and eval") {
    Rng rng(303);
    for (int trial = 0; trial < 20; ++trial) {
        int64_t B = rng.uniform_int(2, 3), C = rng.uniform_int(1, 4), L = rng.uniform_int(2, 9);
        Tensor x = Tensor::from_values(Shape{B, C, L}, random_vec(rng, B * C * L, -2.0, 2.0), true);
        auto st = BatchNormState::make(C);
        st.training = trial % 2 == 0;
        st.gamma.values_mut() = random_vec(rng, C, 0.5, 1.5);
        st.beta.values_mut() = random_vec(rng, C, -0.5, 0.5);
        for (int64_t c = 0; c < C; ++c) {
            st.running_mean[static_cast<size_t>(c)] = rng.uniform(-0.5, 0.5);
            st.running_var[static_cast<size_t>(c)] = rng.uniform(0.5, 1.5);
        }
        auto ws = random_vec(rng, B * C * L);
        double err = gradcheck({x, st.gamma, st.beta}, [&]() { return weighted_sum(batch_norm(x, st), ws); });
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("gradcheck: leaky_relu, sigmoid, add, concat, smooth_l1") {
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        int64_t n = rng.uniform_int(2, 24);
        // keep leaky_relu inputs away from the origin kink
        std::vector<double> lv = random_vec(rng, n, 0.05, 1.5);
        for (auto& v : lv)
            if (rng.uniform() < 0.5) v = -v;
        Tensor xl = Tensor::from_values(Shape{1, 1, n}, lv, true);
        auto ws = random_vec(rng, n);
        REQUIRE(gradcheck({xl}, [&]() { return weighted_sum(leaky_relu(xl, 0.2), ws); }) < 1e-4);

        Tensor xs = Tensor::from_values(Shape{1, 1, n}, random_vec(rng, n, -2.0, 2.0), true);
        REQUIRE(gradcheck({xs}, [&]() { return weighted_sum(sigmoid(xs), ws); }) < 1e-4);

        Tensor a = Tensor::from_values(Shape{1, 1, n}, random_vec(rng, n), true);
        Tensor b = Tensor::from_values(Shape{1, 1, n}, random_vec(rng, n), true);
        REQUIRE(gradcheck({a, b}, [&]() { return weighted_sum(add(a, b), ws); }) < 1e-4);

        Tensor c1 = Tensor::from_values(Shape{2, 2, 5}, random_vec(rng, 20), true);
        Tensor c2 = Tensor::from_values(Shape{2, 3, 5}, random_vec(rng, 30), true);
        auto wc = random_vec(rng, 50);
        REQUIRE(gradcheck({c1, c2}, [&]() { return weighted_sum(concat_channels(c1, c2), wc); }) < 1e-4);

        // diffs kept away from the |d| = 1 seam
        std::vector<double> pv = random_vec(rng, n, -0.6, 0.6);
        std::vector<double> tv(pv.size());
        for (size_t i = 0; i < tv.size(); ++i) {
            double d = rng.uniform() < 0.5 ? rng.uniform(-0.8, 0.8) : rng.uniform(1.2, 2.0);
            tv[i] = pv[i] + d;
        }
        Tensor pp = Tensor::from_values(Shape{1, 1, n}, pv, true);
        Tensor tt = Tensor::from_values(Shape{1, 1, n}, tv);
        REQUIRE(gradcheck({pp}, [&]() { return smooth_l1(pp, tt); }) < 1e-4);
    }
}

TEST_CASE("gradient splits exactly back through concat") {
    Tensor a = Tensor::from_values(Shape{1, 2, 2}, {1, 2, 3, 4}, true);
    Tensor b = Tensor::from_values(Shape{1, 1, 2}, {5, 6}, true);
    std::vector<double> w = {1, 2, 3, 4, 5, 6};
    auto loss = weighted_sum(concat_channels(a, b), w);
    loss.backward();
    CHECK(a.grad() == std::vector<double>{1, 2, 3, 4});
    CHECK(b.grad() == std::vector<double>{5, 6});
}
