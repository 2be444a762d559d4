#include "checks.hpp"
#include "fixtures.hpp"

#include "agscl/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace agscl;

using checks::worst_relative_error;

TEST_SUITE("nn") {
  TEST_CASE("init shapes, zero biases and He variance") {
    Rng rng(1);
    const auto params = init_network({LayerSpec::dense(400, 300)}, std::vector<std::size_t>{3}, rng);
    REQUIRE(params.layers[0].rows() == 300);
    REQUIRE(params.layers[0].cols() == 401);
    CHECK(params.heads[0].rows() == 3);
    CHECK(params.heads[0].cols() == 301);
    CHECK(params.layers[0].col(400).isZero(0.0));
    CHECK(params.heads[0].col(300).isZero(0.0));
    const auto w = params.layers[0].leftCols(400);
    const double mean = w.mean();
    const double var = (w.array() - mean).square().mean();
    CHECK(mean == doctest::Approx(0.0).epsilon(0.01));
    CHECK(var == doctest::Approx(2.0 / 400).epsilon(0.02));
  }

  TEST_CASE("init is deterministic given the seed") {
    const auto a = fixtures::network(fixtures::mlp_specs(), {2, 3}, 7);
    const auto b = fixtures::network(fixtures::mlp_specs(), {2, 3}, 7);
    CHECK(a.layers[1] == b.layers[1]);
    CHECK(a.heads[1] == b.heads[1]);
  }

  TEST_CASE("counts") {
    const auto p = fixtures::network({LayerSpec::dense(784, 100), LayerSpec::dense(100, 100)},
                                     {2}, 0);
    CHECK(p.node_count() == 200);
    CHECK(p.hidden_scalar_count() == 784 * 100 + 100 + 100 * 100 + 100);
  }

  TEST_CASE("uniform logits give log(C) loss") {
    auto p = fixtures::network(fixtures::mlp_specs(), {3}, 2);
    p.heads[0].setZero();
    Rng rng(3);
    const Matrix x = fixtures::random_matrix(8, 6, rng);
    const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    CHECK(task_loss(p, x, y, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }

  TEST_CASE("finite-difference gradients, two-hidden-layer MLP") {
    Rng rng(11);
    const auto p = fixtures::network(fixtures::mlp_specs(), {3, 2}, 11);
    const Matrix x = fixtures::random_matrix(7, 6, rng);
    CHECK(worst_relative_error(p, x, fixtures::random_labels(7, 2, rng), 1) < 1e-4);
  }

  TEST_CASE("finite-difference gradients, conv net") {
    Rng rng(12);
    const auto specs = fixtures::conv_specs();
    const auto p = fixtures::network(specs, {3}, 12);
    const Matrix x = fixtures::random_matrix(5, specs[0].input_width(), rng);
    CHECK(worst_relative_error(p, x, fixtures::random_labels(5, 3, rng), 0) < 1e-4);
  }

  TEST_CASE("finite-difference gradients, conv into conv") {
    Rng rng(13);
    const auto specs = fixtures::conv2_specs();
    const auto p = fixtures::network(specs, {2}, 13);
    const Matrix x = fixtures::random_matrix(4, specs[0].input_width(), rng);
    CHECK(worst_relative_error(p, x, fixtures::random_labels(4, 2, rng), 0) < 1e-4);
  }

  TEST_CASE("inactive heads get exactly zero gradient") {
    Rng rng(4);
    const auto p = fixtures::network(fixtures::mlp_specs(), {2, 2, 2}, 4);
    const Matrix x = fixtures::random_matrix(5, 6, rng);
    const auto [loss, g] = task_loss_and_grad(p, x, fixtures::random_labels(5, 2, rng), 1);
    CHECK(loss > 0.0);
    CHECK(g.heads[0].isZero(0.0));
    CHECK(g.heads[2].isZero(0.0));
    CHECK_FALSE(g.heads[1].isZero(0.0));
  }

  TEST_CASE("activation means are independent of the batch size") {
    Rng rng(5);
    const auto p = fixtures::network(fixtures::mlp_specs(), {2}, 5);
    Dataset d{fixtures::random_matrix(37, 6, rng), fixtures::random_labels(37, 2, rng)};
    const auto a = mean_node_activations(p, d, 0, 37);
    const auto b = mean_node_activations(p, d, 0, 4);
    for (std::size_t l = 0; l < a.size(); ++l)
      for (std::size_t n = 0; n < a[l].size(); ++n) CHECK(std::abs(a[l][n] - b[l][n]) <= 1e-12);
  }

  TEST_CASE("pruned node has zero activation; parameters untouched") {
    Rng rng(6);
    const auto p = fixtures::network(fixtures::mlp_specs(), {2}, 6);
    const Matrix x = fixtures::random_matrix(4, 6, rng);
    NodeValues pruned{std::vector<double>(5, 0.0), std::vector<double>(4, 0.0)};
    pruned[0][2] = 1.0;
    const auto before = p.layers[0];
    const auto t = forward(p, x, 0, &pruned);
    CHECK(t.activations[0].col(2).isZero(0.0));
    CHECK(p.layers[0] == before);
  }

  TEST_CASE("errors") {
    Rng rng(7);
    const auto p = fixtures::network(fixtures::mlp_specs(), {2}, 7);
    const Matrix x = fixtures::random_matrix(3, 6, rng);
    CHECK_THROWS_AS(forward(p, x, 1), LookupError);
    CHECK_THROWS_AS(forward(p, fixtures::random_matrix(3, 5, rng), 0), DataError);
    CHECK_THROWS_AS(task_loss(p, x, std::vector<int>{0, 1, 2}, 0), DataError);
    CHECK_THROWS_AS(validate_specs(std::vector<LayerSpec>{LayerSpec::dense(4, 3),
                                                          LayerSpec::dense(4, 2)}),
                    ConfigError);
  }
}
