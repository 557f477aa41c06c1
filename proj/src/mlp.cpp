#include "microsim/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace microsim {

MlpParams MlpParams::init(const std::vector<int>& sizes, double dropout,
                          Rng& rng) {
  if (sizes.size() < 2)
    throw ConfigError("mlp layer_sizes needs at least input and output");
  for (int s : sizes)
    if (s < 1) throw ConfigError("mlp layer sizes must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("mlp dropout_rate must be in [0, 1)");
  MlpParams p;
  p.layer_sizes = sizes;
  p.dropout_rate = dropout;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& x : w) x = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
  }
  return p;
}

void MlpParams::validate() const {
  if (layer_sizes.size() < 2 ||
      weights.size() != layer_sizes.size() - 1 ||
      biases.size() != layer_sizes.size() - 1)
    throw ConfigError("mlp layer structure is inconsistent");
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(layer_sizes[l]);
    const auto out = static_cast<std::size_t>(layer_sizes[l + 1]);
    if (weights[l].size() != in * out || biases[l].size() != out)
      throw ConfigError("mlp weight shapes do not chain");
    for (double w : weights[l])
      if (!std::isfinite(w)) throw ConfigError("mlp weights must be finite");
    for (double b : biases[l])
      if (!std::isfinite(b)) throw ConfigError("mlp biases must be finite");
  }
}

namespace {

void affine(const std::vector<double>& w, const std::vector<double>& b,
            const std::vector<double>& x, std::vector<double>& out) {
  const std::size_t rows = b.size();
  const std::size_t cols = x.size();
  out.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

double run_forward(const MlpParams& p, std::span<const double> x, Rng* rng,
                   ForwardCache* cache) {
  if (static_cast<int>(x.size()) != p.input_dim())
    throw std::invalid_argument("forward: input has " +
                                std::to_string(x.size()) + " entries, expected " +
                                std::to_string(p.input_dim()));
  const bool train = rng != nullptr;
  const int layers = p.layer_count();
  if (cache) {
    cache->activations.assign(static_cast<std::size_t>(layers) + 1, {});
    cache->masks.assign(static_cast<std::size_t>(layers), {});
    cache->train_mode = train;
    cache->activations[0].assign(x.begin(), x.end());
  }
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> next;
  for (int l = 0; l < layers; ++l) {
    affine(p.weights[static_cast<std::size_t>(l)],
           p.biases[static_cast<std::size_t>(l)], act, next);
    if (l + 1 < layers) {
      for (double& v : next) v = std::max(0.0, v);
      if (train && p.dropout_rate > 0.0) {
        const double keep = 1.0 - p.dropout_rate;
        std::vector<double> mask(next.size());
        for (std::size_t i = 0; i < next.size(); ++i) {
          mask[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          next[i] *= mask[i];
        }
        if (cache) cache->masks[static_cast<std::size_t>(l)] = std::move(mask);
      }
    }
    act.swap(next);
    if (cache && l + 1 < layers)
      cache->activations[static_cast<std::size_t>(l) + 1] = act;
  }
  const double out = act.front();
  if (cache) cache->output = out;
  return out;
}

}  // namespace

double forward(const MlpParams& p, std::span<const double> x,
               ForwardCache* cache) {
  return run_forward(p, x, nullptr, cache);
}

double forward_train(const MlpParams& p, std::span<const double> x, Rng& rng,
                     ForwardCache& cache) {
  return run_forward(p, x, &rng, &cache);
}

Gradients Gradients::zeros_like(const MlpParams& p) {
  Gradients g;
  for (const auto& w : p.weights) g.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i)
      weights[l][i] += other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i)
      biases[l][i] += other.biases[l][i];
  }
}

void Gradients::scale(double factor) {
  for (auto& w : weights)
    for (double& x : w) x *= factor;
  for (auto& b : biases)
    for (double& x : b) x *= factor;
}

Gradients backward(const MlpParams& p, const ForwardCache& cache,
                   double target) {
  const int layers = p.layer_count();
  if (cache.activations.size() != static_cast<std::size_t>(layers) + 1)
    throw std::logic_error("backward: cache does not match network shape");
  for (int l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(p.layer_sizes[static_cast<std::size_t>(l)]);
    if (cache.activations[static_cast<std::size_t>(l)].size() != in)
      throw std::logic_error("backward: cache activations are stale");
  }

  Gradients g = Gradients::zeros_like(p);
  // Loss is (y - target)^2, so dL/dy = 2 (y - target).
  std::vector<double> delta{2.0 * (cache.output - target)};
  std::vector<double> prev;
  for (int l = layers - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const auto& act_in = cache.activations[lu];
    const std::size_t rows = p.biases[lu].size();
    const std::size_t cols = act_in.size();
    for (std::size_t r = 0; r < rows; ++r) {
      g.biases[lu][r] = delta[r];
      double* gw = g.weights[lu].data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gw[c] = delta[r] * act_in[c];
    }
    if (l == 0) break;
    prev.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* wr = p.weights[lu].data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) prev[c] += wr[c] * delta[r];
    }
    // Through dropout and ReLU: the flowing activation is zero exactly where
    // either gate closed.
    const auto& mask = cache.masks[lu - 1];
    for (std::size_t c = 0; c < cols; ++c) {
      double m = act_in[c] > 0.0 ? 1.0 : 0.0;
      if (!mask.empty()) m *= mask[c];
      prev[c] *= m;
    }
    delta.swap(prev);
  }
  return g;
}

AdamState AdamState::init_like(const MlpParams& p, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& w : p.weights) {
    s.m_weights.emplace_back(w.size(), 0.0);
    s.v_weights.emplace_back(w.size(), 0.0);
  }
  for (const auto& b : p.biases) {
    s.m_biases.emplace_back(b.size(), 0.0);
    s.v_biases.emplace_back(b.size(), 0.0);
  }
  return s;
}

void adam_step(MlpParams& p, AdamState& opt, const Gradients& grads) {
  for (const auto& w : grads.weights)
    for (double x : w)
      if (!std::isfinite(x)) throw TrainFault("adam_step: non-finite gradient");
  for (const auto& b : grads.biases)
    for (double x : b)
      if (!std::isfinite(x)) throw TrainFault("adam_step: non-finite gradient");

  ++opt.step_count;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  auto update = [&](std::vector<double>& param, std::vector<double>& m,
                    std::vector<double>& v, const std::vector<double>& g) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      param[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  };
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    update(p.weights[l], opt.m_weights[l], opt.v_weights[l], grads.weights[l]);
    update(p.biases[l], opt.m_biases[l], opt.v_biases[l], grads.biases[l]);
  }
}

void Dataset::append(std::span<const double> obs, double label) {
  if (input_dim == 0) input_dim = static_cast<int>(obs.size());
  if (static_cast<int>(obs.size()) != input_dim)
    throw std::invalid_argument("dataset append: observation width mismatch");
  observations.insert(observations.end(), obs.begin(), obs.end());
  labels.push_back(label);
}

void Dataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open dataset file for writing: " + path);
  for (int i = 0; i < input_dim; ++i) out << "obs_" << i << ",";
  out << "label\n";
  char buf[32];
  for (std::size_t r = 0; r < size(); ++r) {
    const auto row_span = row(r);
    for (double v : row_span) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g", labels[r]);
    out << buf << "\n";
  }
}

Dataset Dataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset CSV is empty: " + path);
  const auto cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  Dataset d;
  d.input_dim = cols - 1;
  std::vector<double> obs(static_cast<std::size_t>(d.input_dim));
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    for (int i = 0; i < cols; ++i) {
      const double v = std::strtod(s, &end);
      if (end == s)
        throw ParseError("dataset CSV parse error at row " +
                         std::to_string(row_no));
      if (i < d.input_dim)
        obs[static_cast<std::size_t>(i)] = v;
      else
        d.labels.push_back(v);
      s = (*end == ',') ? end + 1 : end;
    }
    d.observations.insert(d.observations.end(), obs.begin(), obs.end());
  }
  return d;
}

double train_epoch(MlpParams& p, AdamState& opt, const Dataset& data,
                   int batch_size, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);

  double loss_sum = 0.0;
  ForwardCache cache;
  Gradients batch_grad = Gradients::zeros_like(p);
  std::size_t done = 0;
  while (done < n) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), n - done);
    for (auto& w : batch_grad.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : batch_grad.biases) std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = order[done + k];
      const double y = forward_train(p, data.row(idx), rng, cache);
      const double err = y - data.labels[idx];
      loss_sum += err * err;
      batch_grad.accumulate(backward(p, cache, data.labels[idx]));
    }
    batch_grad.scale(1.0 / static_cast<double>(count));
    adam_step(p, opt, batch_grad);
    done += count;
  }
  return loss_sum / static_cast<double>(n);
}

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'S', 'I', 'M', 'N', 'E', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::string& data;
  std::size_t offset = 0;

  void need(std::size_t n, const char* what) const {
    if (offset + n > data.size())
      throw ParseError("checkpoint parse error at byte " +
                       std::to_string(offset) + ": truncated " + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + static_cast<std::size_t>(i)])) << (8 * i);
    offset += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[offset + static_cast<std::size_t>(i)])) << (8 * i);
    offset += 8;
    return std::bit_cast<double>(v);
  }
};

}  // namespace

void save_checkpoint(const MlpParams& p, const std::string& path) {
  p.validate();
  std::string out;
  out.append(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, static_cast<std::uint32_t>(p.layer_sizes.size()));
  for (int s : p.layer_sizes) put_u32(out, static_cast<std::uint32_t>(s));
  put_f64(out, p.dropout_rate);
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    for (double w : p.weights[l]) put_f64(out, w);
    for (double b : p.biases[l]) put_f64(out, b);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ConfigError("failed writing checkpoint: " + path);
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  ByteReader r{data};
  r.need(sizeof kCheckpointMagic, "magic");
  if (std::memcmp(data.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw ParseError("checkpoint parse error at byte 0: bad magic");
  r.offset = sizeof kCheckpointMagic;

  const std::uint32_t n_sizes = r.u32("layer count");
  if (n_sizes < 2 || n_sizes > 64)
    throw ParseError("checkpoint parse error at byte 8: implausible layer count");
  MlpParams p;
  p.layer_sizes.resize(n_sizes);
  for (auto& s : p.layer_sizes) {
    const std::uint32_t v = r.u32("layer size");
    if (v < 1 || v > (1u << 20))
      throw ParseError("checkpoint parse error at byte " +
                       std::to_string(r.offset - 4) + ": implausible layer size");
    s = static_cast<int>(v);
  }
  p.dropout_rate = r.f64("dropout rate");
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(p.layer_sizes[l]);
    const auto out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    std::vector<double> w(in * out);
    for (double& x : w) x = r.f64("weight");
    std::vector<double> b(out);
    for (double& x : b) x = r.f64("bias");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  if (r.offset != data.size())
    throw ParseError("checkpoint parse error at byte " +
                     std::to_string(r.offset) + ": trailing bytes");
  p.validate();
  return p;
}

}  // namespace microsim
