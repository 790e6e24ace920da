#include <doctest.h>

#include "grad_check.hpp"
#include "maulab/nn.hpp"
#include "maulab/ops.hpp"
#include "maulab/rng.hpp"
#include "maulab/vq.hpp"

using namespace maulab;

TEST_SUITE_BEGIN("grad");

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (double& v : data) v = rng.uniform(-2.0, 2.0);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("elementwise and matmul gradients") {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor c = random_tensor({2}, rng);
  a.set_name("a");
  b.set_name("b");
  c.set_name("c");
  std::vector<Tensor> params{a, b, c};
  auto loss = [&]() {
    return ops::mean(ops::mul(ops::add(ops::matmul(a, b), c), ops::add(ops::matmul(a, b), c)));
  };
  auto report = gradcheck::check_gradients(loss, params);
  CHECK_MESSAGE(report.ok(kTol), report.worst);
}

TEST_CASE("softmax and log_softmax gradients") {
  Rng rng(2);
  Tensor x = random_tensor({4, 5}, rng);
  Tensor w = random_tensor({4, 5}, rng);
  x.set_name("x");
  w.set_name("w");
  std::vector<Tensor> params{x, w};
  auto loss1 = [&]() { return ops::mean(ops::mul(ops::softmax(x), w)); };
  auto r1 = gradcheck::check_gradients(loss1, params);
  CHECK_MESSAGE(r1.ok(kTol), r1.worst);
  auto loss2 = [&]() { return ops::mean(ops::mul(ops::log_softmax(x), w)); };
  auto r2 = gradcheck::check_gradients(loss2, params);
  CHECK_MESSAGE(r2.ok(kTol), r2.worst);
}

TEST_CASE("activation gradients") {
  Rng rng(3);
  Tensor x = random_tensor({3, 3}, rng);
  x.set_name("x");
  std::vector<Tensor> params{x};
  auto gelu_loss = [&]() { return ops::sum(ops::gelu(x)); };
  auto r = gradcheck::check_gradients(gelu_loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);
  auto sig_loss = [&]() { return ops::sum(ops::mul(ops::sigmoid(x), ops::sigmoid(x))); };
  auto r2 = gradcheck::check_gradients(sig_loss, params);
  CHECK_MESSAGE(r2.ok(kTol), r2.worst);
  auto exp_loss = [&]() { return ops::mean(ops::exp(ops::mul(x, 0.3))); };
  auto r3 = gradcheck::check_gradients(exp_loss, params);
  CHECK_MESSAGE(r3.ok(kTol), r3.worst);
}

TEST_CASE("layer_norm gradients") {
  Rng rng(4);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor g = random_tensor({6}, rng);
  Tensor b = random_tensor({6}, rng);
  Tensor w = random_tensor({3, 6}, rng);
  x.set_name("x");
  g.set_name("g");
  b.set_name("b");
  std::vector<Tensor> params{x, g, b};
  auto loss = [&]() { return ops::mean(ops::mul(ops::layer_norm(x, g, b), w)); };
  auto r = gradcheck::check_gradients(loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);
}

TEST_CASE("conv1d gradients across stride and padding") {
  Rng rng(5);
  for (auto [stride, padding, kernel] : {std::tuple{1, 1, 3}, {2, 1, 3}, {2, 0, 2}, {1, 2, 5}}) {
    Tensor x = random_tensor({7, 3}, rng);
    Tensor w = random_tensor({2, 3, static_cast<int64_t>(kernel)}, rng);
    Tensor b = random_tensor({2}, rng);
    x.set_name("x");
    w.set_name("w");
    b.set_name("b");
    std::vector<Tensor> params{x, w, b};
    auto loss = [&, stride = stride, padding = padding]() {
      Tensor y = ops::conv1d(x, w, b, stride, padding);
      return ops::mean(ops::mul(y, y));
    };
    auto r = gradcheck::check_gradients(loss, params);
    CHECK_MESSAGE(r.ok(kTol), "stride=", stride, " pad=", padding, " ", r.worst);
  }
}

TEST_CASE("conv1d_transpose gradients") {
  Rng rng(6);
  for (auto [stride, padding, out_pad] : {std::tuple{2, 1, 1}, {2, 0, 0}, {1, 1, 0}}) {
    Tensor x = random_tensor({5, 2}, rng);
    Tensor w = random_tensor({3, 2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    x.set_name("x");
    w.set_name("w");
    b.set_name("b");
    std::vector<Tensor> params{x, w, b};
    auto loss = [&, stride = stride, padding = padding, out_pad = out_pad]() {
      Tensor y = ops::conv1d_transpose(x, w, b, stride, padding, out_pad);
      return ops::mean(ops::mul(y, y));
    };
    auto r = gradcheck::check_gradients(loss, params);
    CHECK_MESSAGE(r.ok(kTol), r.worst);
  }
}

TEST_CASE("depthwise conv gradients") {
  Rng rng(7);
  Tensor x = random_tensor({6, 4}, rng);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({4}, rng);
  x.set_name("x");
  w.set_name("w");
  b.set_name("b");
  std::vector<Tensor> params{x, w, b};
  auto loss = [&]() {
    Tensor y = ops::depthwise_conv1d(x, w, b, 1);
    return ops::mean(ops::mul(y, y));
  };
  auto r = gradcheck::check_gradients(loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);
}

TEST_CASE("embedding, concat and slice gradients") {
  Rng rng(8);
  Tensor table = random_tensor({5, 3}, rng);
  table.set_name("table");
  std::vector<int32_t> ids{0, 2, 4, 2};
  std::vector<Tensor> params{table};
  auto loss = [&]() {
    Tensor e = ops::embedding(table, ids);  // repeated id accumulates
    Tensor left = ops::slice(e, 1, 0, 2);
    Tensor right = ops::slice(e, 1, 1, 3);
    std::vector<Tensor> parts{left, right};
    Tensor joined = ops::concat(parts, 1);
    return ops::mean(ops::mul(joined, joined));
  };
  auto r = gradcheck::check_gradients(loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);
}

TEST_CASE("loss head gradients") {
  Rng rng(9);
  Tensor logits = random_tensor({4, 6}, rng);
  logits.set_name("logits");
  std::vector<int32_t> targets{1, 0, 5, 3};
  std::vector<Tensor> params{logits};
  auto ce_loss = [&]() { return ops::cross_entropy(logits, targets); };
  auto r = gradcheck::check_gradients(ce_loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);

  Tensor z = random_tensor({6}, rng);
  z.set_name("z");
  std::vector<double> y{0, 1, 1, 0, 1, 0};
  std::vector<Tensor> params2{z};
  auto bce_loss = [&]() { return ops::bce_with_logits(z, y); };
  auto r2 = gradcheck::check_gradients(bce_loss, params2);
  CHECK_MESSAGE(r2.ok(kTol), r2.worst);

  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  a.set_name("a");
  b.set_name("b");
  std::vector<Tensor> params3{a, b};
  auto mse_loss = [&]() { return ops::mse(a, b); };
  auto r3 = gradcheck::check_gradients(mse_loss, params3);
  CHECK_MESSAGE(r3.ok(kTol), r3.worst);
}

TEST_CASE("attention block gradients") {
  Rng rng(10);
  nn::ParamStore store;
  nn::AttentionParams attn = nn::make_attention(store, "attn", 6, rng);
  Tensor q = random_tensor({4, 6}, rng);
  Tensor kv = random_tensor({3, 6}, rng);
  q.set_name("q");
  kv.set_name("kv");
  std::vector<Tensor> params = store.params();
  params.push_back(q);
  params.push_back(kv);
  auto loss = [&]() {
    Tensor out = nn::attention(q, kv, attn, 2).out;
    return ops::mean(ops::mul(out, out));
  };
  auto r = gradcheck::check_gradients(loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);
}

TEST_CASE("diversity loss gradient on softmax outputs") {
  Rng rng(11);
  Tensor logits = random_tensor({5, 4}, rng);
  logits.set_name("logits");
  std::vector<Tensor> params{logits};
  auto loss = [&]() { return diversity_loss(ops::softmax(logits)); };
  auto r = gradcheck::check_gradients(loss, params);
  CHECK_MESSAGE(r.ok(kTol), r.worst);
}

TEST_CASE("straight-through passes gradients through the soft path") {
  // With a readout linear in the assignment, d(loss)/d(logits) must be
  // identical whether the forward used the hard one-hot or the soft values.
  Rng rng(12);
  Tensor logits = random_tensor({3, 5}, rng);
  Tensor readout = random_tensor({3, 5}, rng, /*requires_grad=*/false);
  logits.set_name("logits");
  std::vector<double> noise_data(15);
  Rng noise_rng(99);
  for (double& g : noise_data) g = noise_rng.gumbel();
  Tensor noise = Tensor::from_data({3, 5}, noise_data);

  std::vector<Tensor> params{logits};
  Tensor hard_loss = ops::sum(
      ops::mul(gumbel_softmax_with_noise(logits, 0.7, noise, true).assignment, readout));
  zero_grads(params);
  backward(hard_loss, params);
  std::vector<double> grad_hard(logits.grad().begin(), logits.grad().end());

  Tensor soft_loss = ops::sum(
      ops::mul(gumbel_softmax_with_noise(logits, 0.7, noise, false).assignment, readout));
  zero_grads(params);
  backward(soft_loss, params);
  for (size_t i = 0; i < grad_hard.size(); ++i)
    CHECK(grad_hard[i] == doctest::Approx(logits.grad()[i]).epsilon(1e-12));
}

TEST_SUITE_END();
