#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <doctest.h>

#include "microsim/mlp.hpp"

using namespace microsim;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("forward basics") {
  SUBCASE("all-zero parameters map everything to zero") {
    Rng rng(1);
    MlpParams p = MlpParams::init({3, 8, 8, 1}, 0.0, rng);
    for (auto& w : p.weights) std::fill(w.begin(), w.end(), 0.0);
    const std::vector<double> x{0.3, -2.0, 5.0};
    CHECK(forward(p, x) == 0.0);
  }
  SUBCASE("single linear layer, hand arithmetic") {
    Rng rng(1);
    MlpParams p = MlpParams::init({2, 1}, 0.0, rng);
    p.weights[0] = {1.0, 2.0};
    p.biases[0] = {0.5};
    const std::vector<double> x{1.0, 1.0};
    CHECK(forward(p, x) == doctest::Approx(3.5).epsilon(1e-15));
  }
  SUBCASE("zero dropout makes train mode identical to eval mode") {
    Rng rng(2);
    MlpParams p = MlpParams::init({4, 16, 16, 1}, 0.0, rng);
    const std::vector<double> x{0.1, 0.2, 0.3, 0.4};
    Rng train_rng(3);
    ForwardCache cache;
    CHECK(forward_train(p, x, train_rng, cache) == forward(p, x));
  }
  SUBCASE("dimension mismatch is a shape error") {
    Rng rng(2);
    MlpParams p = MlpParams::init({4, 8, 1}, 0.0, rng);
    const std::vector<double> x{1.0, 2.0};
    CHECK_THROWS_AS(forward(p, x), std::invalid_argument);
  }
}

TEST_CASE("backward gradients") {
  SUBCASE("output equal to target gives zero gradients") {
    Rng rng(4);
    MlpParams p = MlpParams::init({3, 8, 1}, 0.0, rng);
    const std::vector<double> x{0.5, -0.25, 1.0};
    ForwardCache cache;
    const double y = forward(p, x, &cache);
    const Gradients g = backward(p, cache, y);
    for (const auto& w : g.weights)
      for (double v : w) CHECK(v == 0.0);
    for (const auto& b : g.biases)
      for (double v : b) CHECK(v == 0.0);
  }
  SUBCASE("single linear unit, hand chain rule") {
    Rng rng(4);
    MlpParams p = MlpParams::init({1, 1}, 0.0, rng);
    p.weights[0] = {1.0};
    p.biases[0] = {0.0};
    const std::vector<double> x{2.0};
    ForwardCache cache;
    forward(p, x, &cache);
    const Gradients g = backward(p, cache, 0.0);
    // y = w x = 2, L = y^2, dL/dw = 2 y x = 8.
    CHECK(g.weights[0][0] == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(g.biases[0][0] == doctest::Approx(4.0).epsilon(1e-15));
  }
  SUBCASE("matches central finite differences over 100 random draws") {
    Rng rng(5);
    const double h = 1e-5;
    for (int draw = 0; draw < 100; ++draw) {
      MlpParams p = MlpParams::init({5, 12, 12, 1}, 0.0, rng);
      std::vector<double> x(5);
      for (double& v : x) v = rng.uniform(-2.0, 2.0);
      const double target = rng.uniform(-2.0, 2.0);
      ForwardCache cache;
      forward(p, x, &cache);
      const Gradients g = backward(p, cache, target);
      auto loss = [&] {
        const double y = forward(p, x);
        return (y - target) * (y - target);
      };
      for (int probe = 0; probe < 6; ++probe) {
        const auto l =
            static_cast<std::size_t>(rng.uniform_int(p.weights.size()));
        const auto k =
            static_cast<std::size_t>(rng.uniform_int(p.weights[l].size()));
        const double saved = p.weights[l][k];
        p.weights[l][k] = saved + h;
        const double up = loss();
        p.weights[l][k] = saved - h;
        const double dn = loss();
        p.weights[l][k] = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double denom = std::max(1e-6, std::abs(fd));
        REQUIRE(std::abs(g.weights[l][k] - fd) / denom < 1e-4);
      }
    }
  }
  SUBCASE("gradients respect the dropout mask") {
    Rng rng(6);
    MlpParams p = MlpParams::init({3, 32, 1}, 0.5, rng);
    const std::vector<double> x{1.0, -1.0, 0.5};
    Rng train_rng(7);
    ForwardCache cache;
    forward_train(p, x, train_rng, cache);
    const Gradients g = backward(p, cache, 0.0);
    // Units dropped in the forward pass contribute no input-weight gradient.
    const auto& mask = cache.masks[0];
    for (std::size_t unit = 0; unit < mask.size(); ++unit) {
      if (mask[unit] != 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(g.weights[0][unit * 3 + c] == 0.0);
    }
  }
  SUBCASE("stale cache is a contract violation") {
    Rng rng(8);
    MlpParams p = MlpParams::init({3, 8, 1}, 0.0, rng);
    MlpParams other = MlpParams::init({4, 6, 1}, 0.0, rng);
    const std::vector<double> x{1.0, 2.0, 3.0};
    ForwardCache cache;
    forward(p, x, &cache);
    CHECK_THROWS_AS(backward(other, cache, 0.0), std::logic_error);
  }
}

TEST_CASE("adam") {
  Rng rng(9);
  SUBCASE("zero gradient leaves parameters untouched") {
    MlpParams p = MlpParams::init({2, 4, 1}, 0.0, rng);
    const MlpParams before = p;
    AdamState opt = AdamState::init_like(p);
    adam_step(p, opt, Gradients::zeros_like(p));
    CHECK(opt.step_count == 1);
    for (std::size_t l = 0; l < p.weights.size(); ++l)
      CHECK(p.weights[l] == before.weights[l]);
  }
  SUBCASE("first-step magnitude is the learning rate") {
    MlpParams p = MlpParams::init({1, 1}, 0.0, rng);
    const double w0 = p.weights[0][0];
    AdamState opt = AdamState::init_like(p);
    Gradients g = Gradients::zeros_like(p);
    g.weights[0][0] = 0.37;
    adam_step(p, opt, g);
    // Bias-corrected m_hat = g, v_hat = g^2: update = lr * g/(|g| + eps).
    CHECK(std::abs(w0 - p.weights[0][0]) ==
          doctest::Approx(opt.lr).epsilon(1e-6));
    SUBCASE("and stays near lr on a second identical step") {
      const double w1 = p.weights[0][0];
      adam_step(p, opt, g);
      CHECK(std::abs(w1 - p.weights[0][0]) ==
            doctest::Approx(opt.lr).epsilon(1e-6));
    }
  }
  SUBCASE("non-finite gradients fault") {
    MlpParams p = MlpParams::init({1, 1}, 0.0, rng);
    AdamState opt = AdamState::init_like(p);
    Gradients g = Gradients::zeros_like(p);
    g.weights[0][0] = std::nan("");
    CHECK_THROWS_AS(adam_step(p, opt, g), TrainFault);
  }
}

TEST_CASE("train_epoch") {
  SUBCASE("zero learning rate leaves the loss unchanged") {
    Rng rng(10);
    MlpParams p = MlpParams::init({2, 8, 1}, 0.0, rng);
    AdamState opt = AdamState::init_like(p, 0.0);
    Dataset data;
    const std::vector<double> x{0.5, -0.5};
    data.append(x, 1.0);
    Rng epoch_rng(11);
    const double first = train_epoch(p, opt, data, 128, epoch_rng);
    const double second = train_epoch(p, opt, data, 128, epoch_rng);
    CHECK(first == second);
  }
  SUBCASE("converges on a linearly realizable target") {
    Rng rng(12);
    MlpParams p = MlpParams::init({2, 16, 16, 1}, 0.0, rng);
    AdamState opt = AdamState::init_like(p);
    Dataset data;
    // Labels from y = 0.8 x0 - 0.3 x1 + 0.1 on a fixed tiny set.
    Rng gen(13);
    for (int i = 0; i < 32; ++i) {
      const std::vector<double> x{gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0)};
      data.append(x, 0.8 * x[0] - 0.3 * x[1] + 0.1);
    }
    Rng epoch_rng(14);
    double loss = 0.0;
    for (int epoch = 0; epoch < 200; ++epoch)
      loss = train_epoch(p, opt, data, 8, epoch_rng);
    CHECK(loss < 1e-3);
  }
  SUBCASE("fixed seed reproduces the loss trace exactly") {
    auto trace = [] {
      Rng rng(15);
      MlpParams p = MlpParams::init({3, 8, 1}, 0.1, rng);
      AdamState opt = AdamState::init_like(p);
      Dataset data;
      Rng gen(16);
      for (int i = 0; i < 50; ++i) {
        const std::vector<double> x{gen.uniform(-1.0, 1.0),
                                    gen.uniform(-1.0, 1.0),
                                    gen.uniform(-1.0, 1.0)};
        data.append(x, x[0] * x[1]);
      }
      Rng epoch_rng(17);
      std::vector<double> losses;
      for (int epoch = 0; epoch < 5; ++epoch)
        losses.push_back(train_epoch(p, opt, data, 16, epoch_rng));
      return losses;
    };
    CHECK(trace() == trace());
  }
  SUBCASE("empty dataset is an argument error") {
    Rng rng(18);
    MlpParams p = MlpParams::init({2, 4, 1}, 0.0, rng);
    AdamState opt = AdamState::init_like(p);
    Dataset data;
    Rng epoch_rng(19);
    CHECK_THROWS_AS(train_epoch(p, opt, data, 128, epoch_rng),
                    std::invalid_argument);
  }
}

TEST_CASE("inverted dropout preserves the activation expectation") {
  // Monte-Carlo check on one hidden unit: the mask average over many draws
  // approaches 1, so train-mode activations match eval mode in expectation.
  Rng rng(20);
  MlpParams p = MlpParams::init({2, 4, 1}, 0.25, rng);
  const std::vector<double> x{0.7, -0.2};
  ForwardCache eval_cache;
  forward(p, x, &eval_cache);
  const std::vector<double> eval_hidden = eval_cache.activations[1];
  std::vector<double> mean(eval_hidden.size(), 0.0);
  Rng mask_rng(21);
  const int draws = 100000;
  ForwardCache cache;
  for (int i = 0; i < draws; ++i) {
    forward_train(p, x, mask_rng, cache);
    for (std::size_t k = 0; k < mean.size(); ++k)
      mean[k] += cache.activations[1][k];
  }
  for (std::size_t k = 0; k < mean.size(); ++k) {
    mean[k] /= draws;
    if (eval_hidden[k] > 1e-9)
      CHECK(mean[k] == doctest::Approx(eval_hidden[k]).epsilon(0.01));
  }
}

TEST_CASE("checkpoints") {
  SUBCASE("round-trip is bit-exact") {
    Rng rng(22);
    const MlpParams p = MlpParams::init({18, 32, 32, 32, 1}, 0.1, rng);
    const std::string path = temp_path("microsim_test.ckpt");
    save_checkpoint(p, path);
    const MlpParams q = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(q.layer_sizes == p.layer_sizes);
    CHECK(q.dropout_rate == p.dropout_rate);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      CHECK(q.weights[l] == p.weights[l]);
      CHECK(q.biases[l] == p.biases[l]);
    }
  }
  SUBCASE("truncated files are parse errors with a byte offset") {
    Rng rng(23);
    const MlpParams p = MlpParams::init({4, 8, 1}, 0.0, rng);
    const std::string path = temp_path("microsim_trunc.ckpt");
    save_checkpoint(p, path);
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
    }
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("checkpoint parse error at byte"),
                         ParseError);
    std::filesystem::remove(path);
  }
  SUBCASE("bad magic is rejected") {
    const std::string path = temp_path("microsim_magic.ckpt");
    std::ofstream(path, std::ios::binary) << "NOTACKPT and then some";
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("dataset CSV round-trip") {
  Dataset d;
  Rng rng(24);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> obs(6);
    for (double& v : obs) v = rng.uniform(-1.0, 2.0);
    d.append(obs, rng.uniform(-3.0, 1.0));
  }
  const std::string path = temp_path("microsim_dataset.csv");
  d.save_csv(path);
  const Dataset back = Dataset::load_csv(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == d.size());
  REQUIRE(back.input_dim == d.input_dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.labels[i] == d.labels[i]);
    const auto a = d.row(i);
    const auto b = back.row(i);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
}
