#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "microsim/rng.hpp"
#include "microsim/types.hpp"

namespace microsim {

// Fault raised by the training stack (non-finite gradients or actions).
class TrainFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fully-connected feedforward network with ReLU hidden layers, a linear
// scalar output and inverted dropout on the hidden activations.
struct MlpParams {
  std::vector<int> layer_sizes;               // {input, hidden..., output}
  std::vector<std::vector<double>> weights;   // per layer, row-major out x in
  std::vector<std::vector<double>> biases;    // per layer, out
  double dropout_rate = 0.1;

  // Glorot-uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpParams init(const std::vector<int>& sizes, double dropout,
                        Rng& rng);

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }
  void validate() const;
};

struct ForwardCache {
  // activations[l] is the input to layer l after ReLU and dropout;
  // activations[0] is the raw input. masks[l] holds inverted-dropout scale
  // factors for hidden layer l (empty in eval mode).
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> masks;
  double output = 0.0;
  bool train_mode = false;
};

// Deterministic evaluation pass. `cache` is optional.
double forward(const MlpParams& p, std::span<const double> x,
               ForwardCache* cache = nullptr);

// Training pass with inverted dropout (mask / (1 - rate)) on hidden layers.
double forward_train(const MlpParams& p, std::span<const double> x, Rng& rng,
                     ForwardCache& cache);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const MlpParams& p);
  void accumulate(const Gradients& other);
  void scale(double factor);
};

// Exact gradients of the squared error (output - target)^2 with respect to
// every weight and bias, honoring the dropout masks used in the forward
// pass. Throws if the cache does not match the parameter shapes.
Gradients backward(const MlpParams& p, const ForwardCache& cache,
                   double target);

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
  std::int64_t step_count = 0;

  static AdamState init_like(const MlpParams& p, double lr = 0.001);
};

// One bias-corrected Adam update. Throws TrainFault on non-finite gradients.
void adam_step(MlpParams& p, AdamState& opt, const Gradients& grads);

// Append-only store of (observation, expert action) pairs.
struct Dataset {
  int input_dim = 0;
  std::vector<double> observations;  // flattened rows
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  void append(std::span<const double> obs, double label);
  std::span<const double> row(std::size_t i) const {
    return {observations.data() + i * static_cast<std::size_t>(input_dim),
            static_cast<std::size_t>(input_dim)};
  }

  void save_csv(const std::string& path) const;
  static Dataset load_csv(const std::string& path);
};

// One shuffled pass over the dataset in mini-batches (gradients averaged per
// batch, partial final batch used as-is). Returns the mean per-sample
// squared error measured when each sample was visited.
double train_epoch(MlpParams& p, AdamState& opt, const Dataset& data,
                   int batch_size, Rng& rng);

// Checkpoints: versioned header, layer-size list, then per-layer weights
// (row-major) and biases as little-endian IEEE-754 doubles. Round-trips are
// bit-exact; the byte layout is documented in the README.
void save_checkpoint(const MlpParams& p, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace microsim
