#include <doctest.h>

#include "maulab/ops.hpp"
#include "maulab/rng.hpp"
#include "maulab/tensor.hpp"

using namespace maulab;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("shape and data invariants") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), Error);
}

TEST_CASE("matmul shape algebra") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_data({3, 1}, {1, 1, 1});
  Tensor c = ops::matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c.at({0, 0}) == 6.0);
  CHECK(c.at({1, 0}) == 15.0);

  Tensor bad = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_WITH_AS(ops::matmul(a, bad), doctest::Contains("matmul"), Error);
}

TEST_CASE("softmax of a constant row is uniform") {
  Tensor x = Tensor::zeros({3});
  Tensor y = ops::softmax(x);
  for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  double sum = y.data()[0] + y.data()[1] + y.data()[2];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("conv1d output length") {
  // (8 + 2·1 − 3)/2 + 1 = 4
  CHECK(ops::conv1d_output_length(8, 3, 2, 1) == 4);
  Tensor x = Tensor::from_data({8, 1}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor w = Tensor::from_data({1, 1, 3}, {0.5, 1.0, -0.5});
  Tensor b = Tensor::zeros({1});
  Tensor y = ops::conv1d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{4, 1});
}

TEST_CASE("backward of sum of squares") {
  Tensor w = Tensor::from_data({2}, {1, 2}, /*requires_grad=*/true);
  Tensor loss = ops::sum(ops::mul(w, w));
  std::vector<Tensor> params{w};
  backward(loss, params);
  CHECK(w.grad()[0] == doctest::Approx(2.0));
  CHECK(w.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("detached parameters receive zero gradients") {
  Tensor w = Tensor::from_data({2}, {1, 2}, true);
  Tensor p = Tensor::from_data({3}, {1, 1, 1}, true);
  Tensor loss = ops::sum(ops::mul(w, w));
  std::vector<Tensor> params{w, p};
  backward(loss, params);
  for (double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor w = Tensor::from_data({2}, {1, 2}, true);
  Tensor y = ops::mul(w, 2.0);
  std::vector<Tensor> params{w};
  CHECK_THROWS_AS(backward(y, params), Error);
}

TEST_CASE("broadcast add over rows") {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  Tensor b = Tensor::from_data({2}, {10, 20}, true);
  Tensor y = ops::add(x, b);
  CHECK(y.at({0, 0}) == 11.0);
  CHECK(y.at({1, 1}) == 24.0);
  Tensor loss = ops::sum(y);
  std::vector<Tensor> params{x, b};
  backward(loss, params);
  CHECK(b.grad()[0] == doctest::Approx(2.0));  // two rows fold into the bias
}

TEST_CASE("no-grad guard suppresses the tape") {
  Tensor w = Tensor::from_data({2}, {1, 2}, true);
  NoGradGuard guard;
  Tensor y = ops::mul(w, w);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("shape errors name the operation and shapes") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({3}, {1, 2, 3});
  CHECK_THROWS_WITH_AS(ops::add(a, b), doctest::Contains("add"), Error);
  CHECK_THROWS_WITH_AS(ops::add(a, b), doctest::Contains("[2,2]"), Error);
}

TEST_CASE("rng determinism and substreams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c = Rng(42).substream(7);
  Rng d = Rng(42).substream(7);
  CHECK(c.normal() == d.normal());
  Rng e = Rng(42).substream(8);
  bool all_equal = true;
  Rng c2 = Rng(42).substream(7);
  for (int i = 0; i < 8; ++i) all_equal = all_equal && (c2.next_u64() == e.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_SUITE_END();
