#include "fixtures.hpp"

#include "agscl/errors.hpp"
#include "agscl/metrics.hpp"
#include "agscl/tasks.hpp"

#include <doctest.h>

using namespace agscl;

TEST_SUITE("metrics") {
  TEST_CASE("accuracy matrix") {
    AccuracyMatrix a(2);
    a.record(0, 0, 0.9);
    CHECK(a.average(0) == doctest::Approx(0.9));
    a.record(1, 0, 0.8);
    a.record(1, 1, 0.6);
    CHECK(a.average(1) == doctest::Approx(0.7));
    CHECK_THROWS_AS(a.record(0, 1, 0.5), UsageError);
    CHECK_THROWS_AS(a.record(1, 0, 1.5), DataError);
    AccuracyMatrix b(3);
    b.record(0, 0, 0.9);
    CHECK_THROWS_AS(b.at(0, 1), UsageError);
    CHECK(b.complete_rows() == 1);
  }

  TEST_CASE("plasticity and stability") {
    AccuracyMatrix a(2);
    a.record(0, 0, 0.9);
    a.record(1, 0, 0.6);
    a.record(1, 1, 0.8);
    const std::vector<double> ref{0.9, 0.8};
    CHECK(*plasticity(a, ref).value == doctest::Approx(1.0));
    CHECK(*stability(a).value == doctest::Approx((0.6 / 0.9 + 1.0) / 2.0));

    AccuracyMatrix flat(3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j <= i; ++j) flat.record(i, j, 0.5 + 0.1 * static_cast<double>(j));
    CHECK(*stability(flat).value == 1.0);

    AccuracyMatrix zero(1);
    zero.record(0, 0, 0.0);
    const auto s = stability(zero);
    CHECK_FALSE(s.value.has_value());
    CHECK_FALSE(s.per_task[0].has_value());
    CHECK_FALSE(plasticity(zero, std::vector<double>{0.0}).value.has_value());
    CHECK_THROWS_AS(stability(AccuracyMatrix(2)), UsageError);
  }

  TEST_CASE("stability never exceeds one") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      AccuracyMatrix a(4);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j <= i; ++j) a.record(i, j, u(rng));
      CHECK(*stability(a).value <= 1.0);
    }
  }

  TEST_CASE("sparsity and used capacity") {
    CHECK(sparsity(200, 200) == 1.0);
    CHECK(sparsity(50, 200) == 0.25);
    CHECK_THROWS_AS(sparsity(0, 0), UsageError);
    auto p = fixtures::network(fixtures::mlp_specs(), {2}, 1);
    p.layers[0](1, 3) = 0.0;
    const auto layout = build_layout(p.specs);
    const auto prev = PrevParams::snapshot(p);
    CHECK(used_capacity(p, prev, layout) == 1.0);
    p.layers[0](1, 3) += 1e-300;
    CHECK(used_capacity(p, prev, layout) == doctest::Approx(8.0 / 9.0));
    p.layers[1](0, 0) += 1e-5;
    CHECK(used_capacity(p, prev, layout) == doctest::Approx(7.0 / 9.0));
    CHECK(used_capacity(p, prev, layout, 1e-4) == doctest::Approx(1.0));
  }

  TEST_CASE("accuracy uses the first maximal logit") {
    auto p = fixtures::network({LayerSpec::dense(2, 2)}, {3}, 1);
    p.heads[0].setZero();
    Dataset d{Matrix::Ones(3, 2), {0, 1, 2}};
    CHECK(evaluate_accuracy(p, d, 0) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(evaluate_accuracy(p, Dataset{}, 0), DataError);
  }

  TEST_CASE("aopc curve") {
    const auto stream = synth_tasks(1, 3, 8, 40, 5.0, 2);
    auto p = fixtures::network(fixtures::mlp_specs(8, 6, 5), stream.head_dims(), 2);
    const auto layout = build_layout(p.specs);
    OmegaRegistry omega(layout);
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const NodeId n : layout.nodes()) omega.set(n, u(rng));
    const std::vector<EvalSet> sets{{&stream.tasks[0].test, 0}};
    const std::vector<double> fractions{0.0, 0.5, 1.0};
    const auto before = p;
    const auto curve = aopc_curve(p, layout, omega, sets, AopcOrder::highest, fractions, rng);
    CHECK(curve.accuracy[0] == evaluate_accuracy(p, stream.tasks[0].test, 0));
    // With every hidden node dead the head sees only its bias: one class for every example.
    auto dead = p;
    for (auto& m : dead.layers) m.setZero();
    CHECK(curve.accuracy[2] == evaluate_accuracy(dead, stream.tasks[0].test, 0));
    CHECK(p.layers[0] == before.layers[0]);
    CHECK_THROWS_AS(aopc_curve(p, layout, omega, sets, AopcOrder::lowest,
                               std::vector<double>{0.1, 0.5}, rng),
                    UsageError);
  }

  TEST_CASE("pruning order ties break by node id") {
    const GroupLayout layout(fixtures::mlp_specs(3, 2, 2));
    OmegaRegistry omega(layout);
    omega.set({0, 1}, 2.0);
    omega.set({1, 0}, 2.0);
    Rng rng(1);
    const auto high = pruning_order(layout, omega, AopcOrder::highest, rng);
    CHECK(high == std::vector<NodeId>{{0, 1}, {1, 0}, {0, 0}, {1, 1}});
    const auto low = pruning_order(layout, omega, AopcOrder::lowest, rng);
    CHECK(low == std::vector<NodeId>{{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  }

  TEST_CASE("aopc area") {
    AopcCurve c;
    c.fractions = {0.0, 0.5, 1.0};
    c.accuracy = {0.9, 0.7, 0.5};
    CHECK(aopc_area(c) == doctest::Approx(0.5 * (0.0 + 0.2) * 0.5 + 0.5 * (0.2 + 0.4) * 0.5));
    CHECK(parse_aopc_order("random") == AopcOrder::random);
    CHECK_THROWS_AS(parse_aopc_order("median"), ConfigError);
  }

  TEST_CASE("reg param count") {
    const GroupLayout mlp(std::vector<LayerSpec>{LayerSpec::dense(784, 100), LayerSpec::dense(100, 100)});
    const auto r = reg_param_count(mlp);
    CHECK(r.nodes == 200);
    CHECK(r.weights == 88600);
    CHECK(r.ratio() < 1.0 / 400.0);
    const GroupLayout conv(fixtures::conv2_specs());
    CHECK(reg_param_count(conv).nodes == 2 + 3 + 4);
  }
}
