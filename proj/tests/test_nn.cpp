#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "drnet/nn.hpp"
#include "drnet/rng.hpp"
#include "drnet/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace drnet;
using drnet::testing::gradcheck;

TEST_CASE("fully_connected identity") {
    auto x = Tensor::from_data({1, 2}, {1, 0});
    auto w = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    auto b = Tensor::zeros({2});
    auto y = fully_connected(x, w, b);
    CHECK(y.at({0, 0}) == 1.0);
    CHECK(y.at({0, 1}) == 0.0);
}

TEST_CASE("grad of sum(xW) wrt W equals columnwise sums of x") {
    Rng rng(1);
    auto x = Tensor::randn({3, 5}, rng);
    auto w = Tensor::randn({5, 2}, rng, 1.0, true);
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(sum_all(matmul(x, w)));
    }
    for (int i = 0; i < 5; ++i) {
        double colsum = 0.0;
        for (int r = 0; r < 3; ++r) colsum += x.at({r, i});
        for (int o = 0; o < 2; ++o) {
            CHECK(w.grad()[static_cast<size_t>(i * 2 + o)] == doctest::Approx(colsum));
        }
    }
}

TEST_CASE("fully_connected gradients vs finite differences (rel err < 1e-5)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 40);
        auto x = Tensor::randn({3, 5}, rng, 1.0, true);
        auto w = Tensor::randn({5, 2}, rng, 1.0, true);
        auto b = Tensor::randn({2}, rng, 1.0, true);
        auto probe = Tensor::randn({3, 2}, rng);
        auto fn = [&] { return sum_all(mul(fully_connected(x, w, b), probe)); };
        CHECK(gradcheck(fn, {x, w, b}) < 1e-5);
    }
}

TEST_CASE("matmul rejects dim mismatch") {
    Rng rng(2);
    auto x = Tensor::randn({3, 5}, rng);
    auto w = Tensor::randn({4, 2}, rng);
    CHECK_THROWS_AS(matmul(x, w), std::invalid_argument);
}

TEST_CASE("conv2d_1xk delta kernel is channel-mixing identity") {
    Rng rng(3);
    auto x = Tensor::randn({1, 2, 3, 6}, rng);
    // kernel picking channel 1 with centered delta
    auto k = Tensor::zeros({1, 2, 1, 3});
    k.data_mut()[static_cast<size_t>(1 * 3 + 1)] = 1.0;  // [0][1][0][1]
    auto b = Tensor::zeros({1});
    auto y = conv2d_1xk(x, k, b);
    for (int h = 0; h < 3; ++h) {
        for (int w = 0; w < 6; ++w) {
            CHECK(y.at({0, 0, h, w}) == doctest::Approx(x.at({0, 1, h, w})));
        }
    }
}

TEST_CASE("conv2d_1xk all-ones kernel hand example") {
    auto x = Tensor::from_data({1, 1, 1, 4}, {1, 2, 3, 4});
    auto k = Tensor::from_data({1, 1, 1, 3}, {1, 1, 1});
    auto b = Tensor::zeros({1});
    auto y = conv2d_1xk(x, k, b);
    const std::vector<double> want{3, 6, 9, 7};
    for (int w = 0; w < 4; ++w) CHECK(y.at({0, 0, 0, w}) == doctest::Approx(want[static_cast<size_t>(w)]));
}

TEST_CASE("conv2d_1xk forward matches quadruple-loop oracle") {
    Rng rng(4);
    const int B = 2, Cin = 3, Cout = 4, H = 8, W = 16, K = 3;
    auto x = Tensor::randn({B, Cin, H, W}, rng);
    auto k = Tensor::randn({Cout, Cin, 1, K}, rng);
    auto b = Tensor::randn({Cout}, rng);
    auto y = conv2d_1xk(x, k, b);
    for (int bi = 0; bi < B; ++bi) {
        for (int co = 0; co < Cout; ++co) {
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) {
                    double acc = b.at({co});
                    for (int ci = 0; ci < Cin; ++ci) {
                        for (int t = 0; t < K; ++t) {
                            const int ws = w + t - K / 2;
                            if (ws < 0 || ws >= W) continue;
                            acc += x.at({bi, ci, h, ws}) * k.at({co, ci, 0, t});
                        }
                    }
                    CHECK(y.at({bi, co, h, w}) == doctest::Approx(acc).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("conv2d_1xk gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 60);
        auto x = Tensor::randn({2, 2, 3, 5}, rng, 1.0, true);
        auto k = Tensor::randn({3, 2, 1, 3}, rng, 1.0, true);
        auto b = Tensor::randn({3}, rng, 1.0, true);
        auto probe = Tensor::randn({2, 3, 3, 5}, rng);
        auto fn = [&] { return sum_all(mul(conv2d_1xk(x, k, b), probe)); };
        CHECK(gradcheck(fn, {x, k, b}) < 1e-4);
    }
}

TEST_CASE("conv2d_1xk validates kernel") {
    Rng rng(5);
    auto x = Tensor::randn({1, 2, 3, 4}, rng);
    auto beven = Tensor::zeros({1});
    CHECK_THROWS_AS(conv2d_1xk(x, Tensor::zeros({1, 2, 1, 4}), beven), std::invalid_argument);
    CHECK_THROWS_AS(conv2d_1xk(x, Tensor::zeros({1, 3, 1, 3}), beven), std::invalid_argument);
}

TEST_CASE("batchnorm2d passes through standardized input") {
    Rng rng(6);
    const int B = 4, C = 2, H = 3, W = 5;
    auto x = Tensor::randn({B, C, H, W}, rng, 1.0, false);
    // standardize per channel
    for (int c = 0; c < C; ++c) {
        double mean = 0.0, var = 0.0;
        const int m = B * H * W;
        for (int b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) mean += x.at({b, c, h, w});
        mean /= m;
        for (int b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) var += std::pow(x.at({b, c, h, w}) - mean, 2);
        var /= m;
        auto d = x.data_mut();
        for (int b = 0; b < B; ++b)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    auto& v = d[static_cast<size_t>(((b * C + c) * H + h) * W + w)];
                    v = (v - mean) / std::sqrt(var);
                }
    }
    BatchNorm2d bn(C);
    auto y = bn.forward(x, true);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        CHECK(y.data()[static_cast<size_t>(i)] ==
              doctest::Approx(x.data()[static_cast<size_t>(i)]).epsilon(1e-4));
    }
}

TEST_CASE("batchnorm2d maps constant input to beta") {
    auto x = Tensor::full({2, 1, 2, 3}, 42.0);
    BatchNorm2d bn(1);
    bn.beta = Tensor::full({1}, 5.0, true);
    auto y = bn.forward(x, true);
    for (double v : y.data()) CHECK(v == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("batchnorm2d gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 80);
        auto x = Tensor::randn({2, 3, 4, 4}, rng, 1.0, true);
        auto gamma = Tensor::randn({3}, rng, 0.3, true);
        for (auto& g : gamma.data_mut()) g += 1.0;
        auto beta = Tensor::randn({3}, rng, 0.3, true);
        auto probe = Tensor::randn({2, 3, 4, 4}, rng);
        BatchNormStats stats;
        auto fn = [&] {
            BatchNormStats local = stats;  // keep running stats untouched across fd evals
            return sum_all(mul(batchnorm2d(x, gamma, beta, local, 1e-5, 0.1, true), probe));
        };
        CHECK(gradcheck(fn, {x, gamma, beta}) < 1e-4);
    }
}

TEST_CASE("batchnorm2d eval mode uses running stats") {
    Rng rng(7);
    auto x = Tensor::randn({3, 2, 2, 2}, rng);
    BatchNorm2d bn(2);
    (void)bn.forward(x, true);
    const std::vector<double> rm(bn.stats.running_mean.data().begin(),
                                 bn.stats.running_mean.data().end());
    auto x2 = Tensor::randn({1, 2, 2, 2}, rng);
    (void)bn.forward(x2, false);
    for (int c = 0; c < 2; ++c) {
        CHECK(bn.stats.running_mean.data()[static_cast<size_t>(c)] == rm[static_cast<size_t>(c)]);
    }
}

TEST_CASE("pool_rows_mean keeps constants and has uniform gradient") {
    auto x = Tensor::full({1, 2, 4, 3}, 2.5, true);
    Tape tape;
    {
        TapeScope scope(tape);
        auto y = pool_rows_mean(x);
        REQUIRE(y.shape() == Shape{1, 2, 1, 3});
        for (double v : y.data()) CHECK(v == doctest::Approx(2.5));
        tape.backward(sum_all(y));
    }
    for (double g : x.grad()) CHECK(g == doctest::Approx(0.25));
}

TEST_CASE("global_avg and pooling gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 200);
        auto x = Tensor::randn({2, 3, 4, 8}, rng, 1.0, true);
        auto probe = Tensor::randn({2, 3}, rng);
        auto fn = [&] {
            auto g = global_avg(x);                         // [2,3]
            auto p = pool_rows_mean(x);                     // [2,3,1,8]
            auto a = avgpool_w(x, 2);                       // [2,3,4,4]
            auto u = upsample_nearest_w(a, 2);              // [2,3,4,8]
            return add(sum_all(mul(g, probe)), add(sum_all(p), sum_all(mul(u, x))));
        };
        CHECK(gradcheck(fn, {x}) < 1e-4);
    }
}

TEST_CASE("scale_channels and scale_rows gradients") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 400);
        auto x = Tensor::randn({2, 3, 4, 5}, rng, 1.0, true);
        auto gc = Tensor::randn({2, 3}, rng, 1.0, true);
        auto gr = Tensor::randn({2, 4}, rng, 1.0, true);
        auto probe = Tensor::randn({2, 3, 4, 5}, rng);
        auto fn = [&] { return sum_all(mul(scale_rows(scale_channels(x, gc), gr), probe)); };
        CHECK(gradcheck(fn, {x, gc, gr}) < 1e-4);
    }
}

TEST_CASE("mean_rows averages selected rows and scatters gradient") {
    auto x = Tensor::from_data({1, 3, 2}, {1, 2, 3, 4, 5, 6}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        auto y = mean_rows(x, {0, 2});
        CHECK(y.at({0, 0}) == doctest::Approx(3.0));
        CHECK(y.at({0, 1}) == doctest::Approx(4.0));
        tape.backward(sum_all(y));
    }
    CHECK(x.grad()[0] == doctest::Approx(0.5));
    CHECK(x.grad()[2] == doctest::Approx(0.0));
    CHECK(x.grad()[4] == doctest::Approx(0.5));
    CHECK_THROWS_AS(mean_rows(x, {3}), std::out_of_range);
    CHECK_THROWS_AS(mean_rows(x, {}), std::invalid_argument);
}

TEST_CASE("magnify_rows gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 500);
        // well-separated values so the 1e-4 probes cannot change argmin/argmax
        auto x = Tensor::zeros({2, 3, 6}, true);
        {
            auto d = x.data_mut();
            for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(i % 7) + 0.3 * rng.uniform();
        }
        auto probe = Tensor::randn({2, 3, 6}, rng);
        auto fn = [&] { return sum_all(mul(magnify_rows(x), probe)); };
        CHECK(gradcheck(fn, {x}) < 1e-4);
    }
}

TEST_CASE("softmax rows sum to one and CE of uniform logits is ln K") {
    auto logits = Tensor::full({5}, 1.7);
    auto s = softmax_lastaxis(logits);
    double sum = 0.0;
    for (double v : s.data()) sum += v;
    CHECK(sum == doctest::Approx(1.0));
    auto ce = cross_entropy(logits, 2);
    CHECK(ce.item() == doctest::Approx(std::log(5.0)));
}

TEST_CASE("CE of peaked logits matches direct evaluation") {
    auto logits = Tensor::from_data({3}, {10, 0, 0});
    auto ce = cross_entropy(logits, 0);
    CHECK(ce.item() == doctest::Approx(std::log1p(2.0 * std::exp(-10.0))).epsilon(1e-10));
    CHECK(ce.item() == doctest::Approx(9.08e-5).epsilon(0.01));
}

TEST_CASE("softmax is shift invariant") {
    Rng rng(8);
    auto logits = Tensor::randn({2, 6}, rng);
    auto shifted = add_scalar(logits, 13.7);
    auto a = softmax_lastaxis(logits);
    auto b = softmax_lastaxis(shifted);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        CHECK(a.data()[static_cast<size_t>(i)] ==
              doctest::Approx(b.data()[static_cast<size_t>(i)]).epsilon(1e-9));
    }
}

TEST_CASE("CE rejects out-of-range target") {
    auto logits = Tensor::from_data({3}, {1, 2, 3});
    CHECK_THROWS_AS(cross_entropy(logits, 3), std::out_of_range);
    CHECK_THROWS_AS(cross_entropy(logits, -1), std::out_of_range);
}

TEST_CASE("softmax and CE gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 600);
        auto logits = Tensor::randn({7}, rng, 1.0, true);
        auto probe = Tensor::randn({7}, rng);
        auto fn = [&] {
            return add(cross_entropy(logits, 3), sum_all(mul(softmax_lastaxis(logits), probe)));
        };
        CHECK(gradcheck(fn, {logits}) < 1e-4);
    }
}

TEST_CASE("first adam step has closed form") {
    auto p = Tensor::scalar(0.0, true);
    p.grad_mut()[0] = 1.0;
    std::vector<Tensor> params{p};
    AdamState st;
    st.lr = 1e-3;
    st.init(params);
    adam_step(params, st);
    CHECK(p.item() == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK_FALSE(p.has_grad());  // grads cleared
    CHECK(st.t == 1);
}

TEST_CASE("composite model gradients vs finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 700);
        auto x = Tensor::randn({4, 3}, rng);
        auto w = Tensor::randn({3, 2}, rng, 1.0, true);
        auto b = Tensor::randn({2}, rng, 1.0, true);
        auto fn = [&] { return sum_all(sigmoid(fully_connected(x, w, b))); };
        CHECK(gradcheck(fn, {w, b}) < 1e-4);
    }
}

TEST_CASE("same seed gives bit-identical parameter trajectories") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Linear fc(4, 3, rng);
        std::vector<Tensor> params;
        fc.collect(params);
        AdamState st;
        st.lr = 1e-2;
        st.init(params);
        auto x = Tensor::randn({5, 4}, rng);
        for (int step = 0; step < 10; ++step) {
            Tape tape;
            TapeScope scope(tape);
            auto y = sum_all(sigmoid(fc.forward(x)));
            tape.backward(y);
            adam_step(params, st);
        }
        std::vector<double> flat;
        for (auto& p : params) flat.insert(flat.end(), p.data().begin(), p.data().end());
        return flat;
    };
    auto a = run(123), b = run(123);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
