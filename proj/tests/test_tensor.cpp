// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <unordered_set>

#include "aitd/checkpoint.hpp"
#include "aitd/error.hpp"
#include "aitd/ops.hpp"
#include "aitd/optim.hpp"
#include "gradcheck.hpp"

using namespace aitd;
using aitd::testing::gradient_relative_error;
using aitd::testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-3;

std::vector<float> naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<float> out(m * n, 0.0f);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                s += static_cast<double>(a.data()[i * k + p]) * b.data()[p * n + j];
            }
            out[i * n + j] = static_cast<float>(s);
        }
    }
    return out;
}

} // namespace

TEST_CASE("matmul matches identity, scalar, and triple-loop cases") {
    auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    auto b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
    auto c = ops::matmul(eye, b);
    CHECK(std::vector<float>(c.data().begin(), c.data().end()) == std::vector<float>{5, 6, 7, 8});

    CHECK(ops::matmul(Tensor::from_data({1, 1}, {2}), Tensor::from_data({1, 1}, {3})).item() == 6.0f);

    Rng rng(11);
    auto x = random_tensor({4, 3}, rng);
    auto y = random_tensor({3, 5}, rng);
    auto z = ops::matmul(x, y);
    auto oracle = naive_matmul(x, y);
    REQUIRE(z.shape() == Shape{4, 5});
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(std::abs(z.data()[i] - oracle[i]) < 1e-6);
    }
}

TEST_CASE("matmul shape error names both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 5});
    try {
        ops::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("softmax analytic values and oracle") {
    auto s = ops::softmax(Tensor::from_data({3}, {0, 0, 0}), 0);
    for (float v : s.data()) {
        CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    }
    auto t = ops::softmax(Tensor::from_data({2}, {0.0f, std::log(2.0f)}), 0);
    CHECK(t.data()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(t.data()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));

    Rng rng(3);
    auto x = random_tensor({7}, rng, 2.0f, false);
    auto y = ops::softmax(x, 0);
    double z = 0.0;
    for (float v : x.data()) {
        z += std::exp(static_cast<double>(v));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(std::abs(y.data()[i] - std::exp(static_cast<double>(x.data()[i])) / z) < 1e-6);
        total += y.data()[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
    CHECK_THROWS_AS(ops::softmax(x, 1), ShapeError);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor({3, 6}, rng, 3.0f, false);
        auto shifted = x.clone();
        const float c = rng.normal(0.0f, 10.0f);
        for (float& v : shifted.data()) {
            v += c;
        }
        for (std::size_t axis = 0; axis < 2; ++axis) {
            auto a = ops::softmax(x, axis);
            auto b = ops::softmax(shifted, axis);
            for (std::size_t i = 0; i < a.numel(); ++i) {
                CHECK(a.data()[i] > 0.0f);
                CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-6);
            }
        }
        auto rows = ops::softmax(x, 1);
        for (std::size_t r = 0; r < 3; ++r) {
            double s = 0.0;
            for (std::size_t c2 = 0; c2 < 6; ++c2) {
                s += rows.data()[r * 6 + c2];
            }
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("masked cross-entropy") {
    SUBCASE("uniform logits give ln V") {
        auto logits = Tensor::zeros({3, 8});
        std::vector<int> targets{2, 5};
        std::vector<std::size_t> sel{0, 2};
        CHECK(ops::masked_cross_entropy(logits, targets, sel).item() == doctest::Approx(std::log(8.0)).epsilon(1e-6));
    }
    SUBCASE("excluded positions receive exactly zero gradient") {
        Rng rng(9);
        auto logits = random_tensor({4, 6}, rng);
        std::vector<int> targets{1, 3};
        std::vector<std::size_t> sel{0, 2};
        backward(ops::masked_cross_entropy(logits, targets, sel));
        for (std::size_t row : {1u, 3u}) {
            for (std::size_t c = 0; c < 6; ++c) {
                CHECK(logits.grad()[row * 6 + c] == 0.0f);
            }
        }
    }
    SUBCASE("matches a direct log-softmax and gather oracle") {
        Rng rng(21);
        for (int trial = 0; trial < 20; ++trial) {
            auto logits = random_tensor({5, 9}, rng, 2.0f, false);
            std::vector<std::size_t> sel{4, 1, 1};
            std::vector<int> targets{static_cast<int>(rng.below(9)), static_cast<int>(rng.below(9)),
                                     static_cast<int>(rng.below(9))};
            double expected = 0.0;
            for (std::size_t i = 0; i < sel.size(); ++i) {
                double z = 0.0;
                for (std::size_t c = 0; c < 9; ++c) {
                    z += std::exp(static_cast<double>(logits.data()[sel[i] * 9 + c]));
                }
                expected -= logits.data()[sel[i] * 9 + static_cast<std::size_t>(targets[i])] - std::log(z);
            }
            expected /= 3.0;
            CHECK(std::abs(ops::masked_cross_entropy(logits, targets, sel).item() - expected) < 1e-5);
        }
    }
    SUBCASE("errors") {
        auto logits = Tensor::zeros({2, 4});
        CHECK_THROWS_AS(ops::masked_cross_entropy(logits, {}, {}), Error);
        std::vector<int> bad{4};
        std::vector<std::size_t> sel{0};
        CHECK_THROWS_AS(ops::masked_cross_entropy(logits, bad, sel), ShapeError);
    }
}

TEST_CASE("backward basics") {
    auto x = Tensor::scalar(3.0f, true);
    backward(ops::mul(x, x));
    CHECK(x.grad()[0] == doctest::Approx(6.0));

    auto frozen = Tensor::from_data({2}, {1, 2}, false);
    auto w = Tensor::from_data({2}, {3, 4}, true);
    backward(ops::sum(ops::mul(frozen, w)));
    CHECK_FALSE(frozen.has_grad());
    CHECK(w.grad()[0] == 1.0f);
    CHECK(w.grad()[1] == 2.0f);

    auto v = Tensor::from_data({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(ops::scale(v, 2.0f)), ShapeError);
}

TEST_CASE("topological order visits each node once with inputs first") {
    Rng rng(1);
    auto a = random_tensor({2, 3}, rng);
    auto b = random_tensor({3, 2}, rng);
    auto c = ops::matmul(a, b);
    auto d = ops::add(c, c);
    auto e = ops::softmax(d, 1);
    auto loss = ops::sum(ops::mul(e, d));
    auto order = topological_order(loss);
    std::unordered_set<const void*> seen;
    for (const auto& t : order) {
        CHECK(seen.insert(t.impl().get()).second);
        for (const auto& in : t.impl()->node->inputs) {
            if (in->node) {
                CHECK(seen.count(in.get()) == 1);
            }
        }
    }
    CHECK(order.back().same_storage(loss));
    CHECK(order.size() == 5); // matmul, add, softmax, mul, sum
}

TEST_CASE("every primitive op passes the finite-difference check") {
    Rng rng(2024);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 5}, rng);
    auto w = random_tensor({5, 4}, rng, 0.5f);
    auto bias = random_tensor({5}, rng);
    auto c = random_tensor({3, 4}, rng);
    auto g = random_tensor({4}, rng);
    auto beta = random_tensor({4}, rng);
    auto table = random_tensor({6, 4}, rng);
    const std::vector<int> ids{1, 4, 1, 0};

    CHECK(gradient_relative_error([&] { return ops::matmul(a, b); }, {a, b}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::linear(a, w, bias); }, {a, w, bias}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::linear(a, w); }, {a, w}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::add(a, c); }, {a, c}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::mul(a, c); }, {a, c}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::scale(a, -1.5f); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::silu(a); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::gelu(a); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::softmax(a, 1); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::softmax(a, 0); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::log_softmax(a); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::layer_norm(a, g, beta); }, {a, g, beta}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::rms_norm(a, g); }, {a, g}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::embedding(table, ids); }, {table}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::mean_rows(a); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::sum(a); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::mean(a); }, {a}) < kGradTol);

    const std::vector<std::size_t> rows{2, 0, 2};
    CHECK(gradient_relative_error([&] { return ops::gather_rows(a, rows); }, {a}) < kGradTol);
    CHECK(gradient_relative_error([&] { return ops::slice_cols(a, 1, 2); }, {a}) < kGradTol);
    CHECK(gradient_relative_error(
              [&] {
                  std::vector<Tensor> parts{a, c, a};
                  return ops::concat_rows(parts);
              },
              {a, c}) < kGradTol);
    CHECK(gradient_relative_error(
              [&] {
                  std::vector<Tensor> terms{a, c, a};
                  return ops::add_n(terms);
              },
              {a, c}) < kGradTol);
    CHECK(gradient_relative_error(
              [&] {
                  Rng drop(77); // fixed mask across evaluations
                  return ops::dropout(a, 0.3f, drop);
              },
              {a}) < kGradTol);

    auto logits = random_tensor({3, 5}, rng, 2.0f);
    const std::vector<int> targets{4, 0};
    const std::vector<std::size_t> sel{2, 0};
    CHECK(gradient_relative_error([&] { return ops::masked_cross_entropy(logits, targets, sel); }, {logits}) <
          kGradTol);
    const std::vector<int> all_targets{1, 2, 3};
    CHECK(gradient_relative_error([&] { return ops::cross_entropy(logits, all_targets); }, {logits}) < kGradTol);
}

TEST_CASE("attention and rope pass the finite-difference check") {
    Rng rng(99);
    const std::size_t len = 5, hd = 4;
    auto q = random_tensor({len, 4 * hd}, rng);
    auto k = random_tensor({len, 2 * hd}, rng);
    auto v = random_tensor({len, 2 * hd}, rng);
    std::vector<unsigned char> mask{1, 1, 0, 1, 1};
    for (bool causal : {false, true}) {
        ops::AttentionSpec spec{4, 2, hd, causal, {}};
        CHECK(gradient_relative_error([&] { return ops::attention(q, k, v, spec); }, {q, k, v}) < kGradTol);
        spec.key_mask = mask;
        CHECK(gradient_relative_error([&] { return ops::attention(q, k, v, spec); }, {q, k, v}) < kGradTol);
    }
    const std::vector<std::size_t> pos{0, 1, 2, 7, 30};
    CHECK(gradient_relative_error([&] { return ops::rope(q, 4, hd, pos, 10000.0f); }, {q}) < kGradTol);
    CHECK_THROWS_AS(ops::rope(Tensor::zeros({2, 6}), 2, 3, std::vector<std::size_t>{0, 1}), ConfigError);
}

TEST_CASE("composite matmul -> softmax -> rmsnorm gradient") {
    Rng rng(5150);
    auto x = random_tensor({4, 6}, rng);
    auto w = random_tensor({6, 6}, rng, 0.4f);
    auto gain = random_tensor({6}, rng);
    auto fwd = [&] { return ops::rms_norm(ops::softmax(ops::matmul(x, w), 1), gain); };
    CHECK(gradient_relative_error(fwd, {x, w, gain}) < kGradTol);
}

TEST_CASE("AdamW contract") {
    auto make_store = [] {
        ParameterStore store;
        store.add("w", Tensor::from_data({3}, {1.0f, -2.0f, 0.5f}));
        store.add("b", Tensor::from_data({2}, {3.0f, -4.0f}), DecayPolicy::kExempt);
        return store;
    };
    SUBCASE("zero gradient applies decoupled decay only to the decay group") {
        auto store = make_store();
        store.zero_grad();
        AdamW opt({.lr = 0.1f});
        opt.step(store);
        const float f = 1.0f - 0.1f * 0.01f;
        CHECK(store.get("w").tensor.data()[0] == 1.0f * f);
        CHECK(store.get("w").tensor.data()[1] == -2.0f * f);
        CHECK(store.get("b").tensor.data()[0] == 3.0f);
        CHECK(store.get("b").tensor.data()[1] == -4.0f);
        CHECK(opt.step_count() == 1);
        CHECK(opt.group(DecayPolicy::kExempt).weight_decay == 0.0f);
        CHECK(opt.group(DecayPolicy::kDecay).weight_decay == 0.01f);
    }
    SUBCASE("first step is approximately -lr * sign(g)") {
        auto store = make_store();
        store.zero_grad();
        std::vector<float> g{0.3f, -5.0f, 1e-3f};
        std::copy(g.begin(), g.end(), store.get("w").tensor.mutable_grad().begin());
        AdamW opt({.lr = 0.01f, .weight_decay = 0.0f});
        opt.step(store);
        const std::vector<float> before{1.0f, -2.0f, 0.5f};
        for (std::size_t i = 0; i < 3; ++i) {
            const double expected = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
            CHECK(store.get("w").tensor.data()[i] - before[i] == doctest::Approx(expected).epsilon(1e-4));
        }
        CHECK(opt.moments().at("w").first.size() == 3);
    }
    SUBCASE("lr = 0 leaves parameters bit-identical") {
        auto store = make_store();
        Rng rng(4);
        store.zero_grad();
        for (auto& p : store.all()) {
            for (float& v : p.tensor.mutable_grad()) {
                v = rng.normal(0.0f, 3.0f);
            }
        }
        AdamW opt({.lr = 0.0f});
        for (int i = 0; i < 3; ++i) {
            opt.step(store);
        }
        CHECK(store.get("w").tensor.data()[1] == -2.0f);
        CHECK(store.get("b").tensor.data()[0] == 3.0f);
        CHECK(opt.step_count() == 3);
    }
    SUBCASE("missing gradient names the parameter") {
        auto store = make_store();
        AdamW opt({});
        try {
            opt.step(store);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("'w'") != std::string::npos);
        }
    }
    SUBCASE("frozen parameters are skipped") {
        auto store = make_store();
        store.set_frozen("w", true);
        store.zero_grad();
        AdamW opt({.lr = 0.5f});
        opt.step(store);
        CHECK(store.get("w").tensor.data()[0] == 1.0f);
        CHECK_FALSE(store.get("w").tensor.has_grad());
    }
}

TEST_CASE("decay-exempt parameters ignore weight decay at any magnitude") {
    for (float mag : {1e-6f, 1.0f, 1e6f}) {
        ParameterStore store;
        store.add("gain", Tensor::full({4}, mag), DecayPolicy::kExempt);
        store.zero_grad();
        AdamW opt({.lr = 0.5f, .weight_decay = 0.9f});
        opt.step(store);
        for (float v : store.get("gain").tensor.data()) {
            CHECK(v == mag);
        }
    }
}

TEST_CASE("SGD with linear decay") {
    ParameterStore store;
    store.add("w", Tensor::from_data({2}, {1.0f, 2.0f}));
    store.zero_grad();
    auto grad = store.get("w").tensor.mutable_grad();
    grad[0] = 0.4f;
    grad[1] = -2.0f;

    CHECK(linear_decay_rate(0, 10, 0.05f) == 0.05f);
    CHECK(sgd_linear_decay_step(store, 10, 10, 0.05f) == 0.0f);
    CHECK(store.get("w").tensor.data()[0] == 1.0f);
    CHECK(store.get("w").tensor.data()[1] == 2.0f);

    const float rate = sgd_linear_decay_step(store, 5, 10, 0.05f);
    CHECK(rate == doctest::Approx(0.025));
    CHECK(store.get("w").tensor.data()[0] == doctest::Approx(1.0 - 0.025 * 0.4));
    CHECK(store.get("w").tensor.data()[1] == doctest::Approx(2.0 + 0.025 * 2.0));

    CHECK_THROWS_AS(sgd_linear_decay_step(store, 0, 0, 0.05f), ConfigError);
}

TEST_CASE("seeded training step is bit-identical across runs") {
    auto run = [] {
        Rng rng(8);
        ParameterStore store;
        auto w = store.add("w", random_tensor({4, 3}, rng));
        auto b = store.add("b", random_tensor({4}, rng), DecayPolicy::kExempt);
        auto x = random_tensor({5, 3}, rng, 1.0f, false);
        AdamW opt({.lr = 0.01f});
        for (int step = 0; step < 3; ++step) {
            store.zero_grad();
            Rng drop(100 + step);
            auto h = ops::dropout(ops::gelu(ops::linear(x, w, b)), 0.2f, drop);
            std::vector<int> t{0, 1, 2, 3, 0};
            backward(ops::cross_entropy(h, t));
            opt.step(store);
        }
        return std::vector<float>(w.data().begin(), w.data().end());
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint container round-trips byte-exactly") {
    Checkpoint ck;
    ck.config_document = R"({"kind":"encoder","note":"人工"})";
    ck.records.push_back({"emb", {2, 3}, {1.5f, -0.0f, 3.0f, 1e-30f, -7.25f, 42.0f}});
    ck.records.push_back({"lora.0.q.A", {1}, {0.125f}});
    const std::string bytes = serialize_checkpoint(ck);
    CHECK(bytes.substr(0, 4) == "AITD");
    const Checkpoint back = parse_checkpoint(bytes);
    CHECK(back.config_document == ck.config_document);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0].shape == Shape{2, 3});
    CHECK(serialize_checkpoint(back) == bytes);

    CHECK_THROWS_AS(parse_checkpoint("XXXX"), FormatError);
    CHECK_THROWS_AS(parse_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 2)), FormatError);

    ParameterStore store;
    store.add("emb", Tensor::zeros({2, 3}));
    store.add("lora.0.q.A", Tensor::zeros({1}));
    load_into(store, back);
    CHECK(store.get("emb").tensor.data()[4] == -7.25f);
    CHECK(records_from(store)[1].values[0] == 0.125f);
}
