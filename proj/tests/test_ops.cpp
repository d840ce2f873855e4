#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lift/nn.hpp"
#include "lift/rng.hpp"
#include "reference_ops.hpp"

using lift::ConvWeights;
using lift::Tensor;

namespace {

Tensor<double> random_tensor(lift::Shape shape, lift::Rng& rng) {
  std::vector<double> d(static_cast<size_t>(lift::shape_numel(shape)));
  for (auto& v : d) v = rng.normal();
  return Tensor<double>::from_data(std::move(shape), std::move(d));
}

ConvWeights<double> pointwise_weights(int cout, int cin, std::vector<double> k, std::vector<double> b) {
  return {Tensor<double>::from_data({cout, cin, 1, 1}, std::move(k)),
          Tensor<double>::from_data({cout}, std::move(b)), false};
}

}  // namespace

TEST_CASE("1x1 identity kernel maps each channel to itself") {
  lift::Rng rng(1);
  auto x = random_tensor({2, 3, 3}, rng);
  auto w = pointwise_weights(2, 2, {1, 0, 0, 1}, {0, 0});
  auto y = lift::conv2d(x, w, 1, 0);
  CHECK(y.data() == x.data());
}

TEST_CASE("3x3 all-ones kernel on all-ones 3x3 input counts the window overlap") {
  auto x = Tensor<double>::full({1, 3, 3}, 1.0);
  ConvWeights<double> w{Tensor<double>::full({1, 1, 3, 3}, 1.0), Tensor<double>::zeros({1}), false};
  auto y = lift::conv2d(x, w, 1, 1);
  CHECK(y.data() == std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4});
}

TEST_CASE("all-zero kernel and bias annihilate any input") {
  lift::Rng rng(2);
  auto x = random_tensor({3, 4, 4}, rng);
  ConvWeights<double> w{Tensor<double>::zeros({2, 3, 3, 3}), Tensor<double>::zeros({2}), false};
  auto y = lift::conv2d(x, w, 1, 1);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("conv2d validates channels and output extents") {
  auto x = Tensor<double>::zeros({3, 4, 4});
  ConvWeights<double> w{Tensor<double>::zeros({2, 4, 3, 3}), Tensor<double>::zeros({2}), false};
  CHECK_THROWS_AS(lift::conv2d(x, w, 1, 1), lift::Error);
  ConvWeights<double> big{Tensor<double>::zeros({2, 3, 5, 5}), Tensor<double>::zeros({2}), false};
  CHECK_THROWS_AS(lift::conv2d(Tensor<double>::zeros({3, 2, 2}), big, 1, 0), lift::Error);
}

TEST_CASE("conv2d agrees with the brute-force oracle on random instances") {
  lift::Rng rng(11);
  for (int it = 0; it < 10; ++it) {
    const int cin = 1 + rng.uniform_int(3), cout = 1 + rng.uniform_int(3);
    const int k = 1 + 2 * rng.uniform_int(3);
    const int h = k + rng.uniform_int(4), w = k + rng.uniform_int(4);
    const int stride = 1 + rng.uniform_int(2), pad = rng.uniform_int(k / 2 + 1);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    auto x = random_tensor({cin, h, w}, rng);
    auto ker = random_tensor({cout, cin, k, k}, rng);
    auto bias = random_tensor({cout}, rng);
    auto y = lift::conv2d(x, ConvWeights<double>{ker, bias, false}, stride, pad);
    auto ref = refops::conv2d(x.data(), cin, h, w, ker.data(), cout, k, bias.data(), stride, pad);
    REQUIRE(y.data().size() == ref.size());
    for (size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("pointwise conv equals a per-pixel linear map") {
  lift::Rng rng(5);
  auto x = random_tensor({4, 5, 5}, rng);
  auto ker = random_tensor({3, 4, 1, 1}, rng);
  auto bias = random_tensor({3}, rng);
  auto y = lift::conv2d(x, ConvWeights<double>{ker, bias, false}, 1, 0);
  // Reference route: matmul of the 3x4 weight with each spatial column.
  auto w2d = lift::reshape(ker, {3, 4});
  auto x2d = lift::reshape(x, {4, 25});
  auto ref = lift::add_bias(lift::matmul(w2d, x2d), bias);
  for (size_t i = 0; i < ref.data().size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
}

TEST_CASE("depthwise identity kernel is the identity") {
  lift::Rng rng(6);
  auto x = random_tensor({3, 4, 4}, rng);
  auto ker = Tensor<double>::zeros({3, 1, 3, 3});
  for (int c = 0; c < 3; ++c) ker.mutable_data()[c * 9 + 4] = 1.0;
  auto y = lift::depthwise_conv2d(x, ConvWeights<double>{ker, Tensor<double>::zeros({3}), true}, 1);
  CHECK(y.data() == x.data());
}

TEST_CASE("depthwise channels are bit-exactly separable") {
  lift::Rng rng(7);
  auto base = random_tensor({4, 5, 5}, rng);
  auto ker = random_tensor({4, 1, 3, 3}, rng);
  auto bias = random_tensor({4}, rng);
  ConvWeights<double> w{ker, bias, true};
  auto y0 = lift::depthwise_conv2d(base, w, 1);
  auto perturbed = Tensor<double>::from_data(base.shape(), base.data());
  perturbed.mutable_data()[3] += 10.0;  // channel 0
  auto y1 = lift::depthwise_conv2d(perturbed, w, 1);
  for (int c = 1; c < 4; ++c)
    for (int i = 0; i < 25; ++i) CHECK(y0.data()[c * 25 + i] == y1.data()[c * 25 + i]);
}

TEST_CASE("depthwise shift kernel shifts columns left with zero fill") {
  lift::Rng rng(8);
  auto x = random_tensor({2, 3, 3}, rng);
  auto ker = Tensor<double>::zeros({2, 1, 3, 3});
  for (int c = 0; c < 2; ++c) ker.mutable_data()[c * 9 + 5] = 1.0;  // row 1, col 2
  auto y = lift::depthwise_conv2d(x, ConvWeights<double>{ker, Tensor<double>::zeros({2}), true}, 1);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) {
        const double expect = col + 1 < 3 ? x.data()[(c * 3 + r) * 3 + col + 1] : 0.0;
        CHECK(y.at({c, r, col}) == expect);
      }
}

TEST_CASE("depthwise separable layer equals a full convolution with the composed kernel") {
  lift::Rng rng(9);
  const int c = 4, h = 6, w = 6, k = 3;
  auto x = random_tensor({c, h, w}, rng);
  auto dk = random_tensor({c, 1, k, k}, rng);
  auto db = random_tensor({c}, rng);
  auto pk = random_tensor({c, c, 1, 1}, rng);
  auto pb = random_tensor({c}, rng);
  auto mid = lift::depthwise_conv2d(x, ConvWeights<double>{dk, db, true}, 1);
  auto y = lift::conv2d(mid, ConvWeights<double>{pk, pb, false}, 1, 0);

  // Composed kernel: full[o][i][ky][kx] = pw[o][i] * dw[i][ky][kx],
  // composed bias: pw . db + pb.
  std::vector<double> full(static_cast<size_t>(c) * c * k * k);
  std::vector<double> fbias(c);
  for (int o = 0; o < c; ++o) {
    double b = pb.data()[o];
    for (int i = 0; i < c; ++i) {
      b += pk.data()[o * c + i] * db.data()[i];
      for (int t = 0; t < k * k; ++t)
        full[(o * c + i) * k * k + t] = pk.data()[o * c + i] * dk.data()[i * k * k + t];
    }
    fbias[o] = b;
  }
  auto ref = refops::conv2d(x.data(), c, h, w, full, c, k, fbias, 1, 1);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
}

TEST_CASE("depthwise kernel channel count must match the input") {
  auto x = Tensor<double>::zeros({3, 4, 4});
  ConvWeights<double> w{Tensor<double>::zeros({2, 1, 3, 3}), Tensor<double>::zeros({2}), true};
  CHECK_THROWS_AS(lift::depthwise_conv2d(x, w, 1), lift::Error);
}

TEST_CASE("softmax of a constant vector is uniform") {
  auto x = Tensor<double>::full({5}, 3.25);
  auto y = lift::softmax(x, 0);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and are strictly positive") {
  lift::Rng rng(10);
  auto x = random_tensor({6, 7}, rng);
  for (int axis : {0, 1}) {
    auto y = lift::softmax(x, axis);
    const int extent = x.shape()[axis];
    const int other = x.numel() / extent;
    for (int s = 0; s < other; ++s) {
      double total = 0;
      for (int j = 0; j < extent; ++j) {
        const double v = axis == 1 ? y.data()[s * extent + j] : y.data()[j * other + s];
        CHECK(v > 0.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(lift::softmax(x, 2), lift::Error);
}

TEST_CASE("layer_norm standardizes [1,2,3]") {
  auto x = Tensor<double>::from_data({3}, {1, 2, 3});
  auto y = lift::layer_norm(x, Tensor<double>::full({3}, 1.0), Tensor<double>::zeros({3}), 1e-12);
  CHECK(y.data()[0] == doctest::Approx(-1.2247448).epsilon(1e-5));
  CHECK(y.data()[1] == doctest::Approx(0.0));
  CHECK(y.data()[2] == doctest::Approx(1.2247448).epsilon(1e-5));
}

TEST_CASE("layer_norm slices have zero mean and unit variance before the affine map") {
  lift::Rng rng(12);
  auto x = random_tensor({8, 5}, rng);
  auto y = lift::layer_norm(x, Tensor<double>::full({8}, 1.0), Tensor<double>::zeros({8}), 1e-6);
  for (int col = 0; col < 5; ++col) {
    double m = 0, v = 0;
    for (int c = 0; c < 8; ++c) m += y.data()[c * 5 + col];
    m /= 8;
    for (int c = 0; c < 8; ++c) {
      const double d = y.data()[c * 5 + col] - m;
      v += d * d;
    }
    v /= 8;
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(v - 1.0) < 1e-5);
  }
  CHECK_THROWS_AS(lift::layer_norm(x, Tensor<double>::full({8}, 1.0), Tensor<double>::zeros({8}), 0.0),
                  lift::Error);
}

TEST_CASE("gelu fixes zero and matches the erf form at a few points") {
  auto x = Tensor<double>::from_data({3}, {0.0, 1.0, -1.0});
  auto y = lift::gelu(x);
  CHECK(y.data()[0] == 0.0);
  CHECK(y.data()[1] == doctest::Approx(0.8413447461).epsilon(1e-9));
  CHECK(y.data()[2] == doctest::Approx(-0.1586552539).epsilon(1e-9));
}

TEST_CASE("cross entropy matches a direct log-softmax evaluation") {
  auto logits = Tensor<double>::from_data({3}, {1.0, 2.0, 0.5});
  auto loss = lift::softmax_cross_entropy(logits, 1);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  CHECK(loss.item() == doctest::Approx(std::log(z) - 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(lift::softmax_cross_entropy(logits, 3), lift::Error);
  CHECK_THROWS_AS(lift::softmax_cross_entropy(logits, -1), lift::Error);
}
