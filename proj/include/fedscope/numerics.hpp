#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace fedscope::numerics {

// Rectifier MLP over flattened pixels. An empty `hidden` list gives a single
// affine layer (linear classifier).
struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int classes = 0;

  void validate() const;
  std::vector<std::pair<int, int>> layer_dims() const;
  std::int64_t param_count() const;
  // 2 * fan_in * fan_out multiply-adds per layer, one sample.
  double forward_flops_per_sample() const;
};

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major [in][out]
  std::vector<double> b;  // [out]
};

// Flat ordered collection of model parameters; the unit exchanged between
// clients and server.
struct ParamSet {
  std::vector<Layer> layers;

  std::int64_t coord_count() const;
  bool all_finite() const;
  int input_dim() const { return layers.front().in; }
  int output_classes() const { return layers.back().out; }

  // Flat coordinate view (per layer: weights then biases). Used by the
  // finite-difference checks; not a hot path.
  double get_coord(std::int64_t flat) const;
  void set_coord(std::int64_t flat, double value);
};

bool same_shape(const ParamSet& a, const ParamSet& b);
void check_same_shape(const ParamSet& a, const ParamSet& b);
ParamSet zeros_like(const ParamSet& shape);
void add_scaled(ParamSet& dst, const ParamSet& src, double factor);  // dst += factor*src
ParamSet difference(const ParamSet& a, const ParamSet& b);
double max_abs_diff(const ParamSet& a, const ParamSet& b);
bool bit_identical(const ParamSet& a, const ParamSet& b);

// Weighted mean, anchored at the first set so that averaging identical sets
// reproduces them exactly. Weights must sum to 1.
ParamSet weighted_average(const std::vector<const ParamSet*>& sets,
                          const std::vector<double>& weights);

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// He-style initialization: weights N(0, sqrt(2/fan_in)), biases zero.
ParamSet init_params(const ModelSpec& spec, std::uint64_t seed);

Matrix forward(const ParamSet& params, const Matrix& batch);

// Mean over the batch of -sum_k y[k]*log softmax(logits)[k] with
// y = (1-s)*onehot + s/K.
double loss_smoothed_ce(const Matrix& logits, const std::vector<int>& labels,
                        double smoothing);

struct Proximal {
  double mu = 0.0;
  const ParamSet* anchor = nullptr;
};

// Analytic gradient of the smoothed cross-entropy; adds mu*(params - anchor)
// elementwise when a proximal term is given.
ParamSet gradient(const ParamSet& params, const Matrix& batch,
                  const std::vector<int>& labels, double smoothing,
                  const Proximal* prox = nullptr, double* loss_out = nullptr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Lower learning rate matching the reference benchmark setup.
AdamConfig replication_profile();

struct AdamState {
  AdamConfig config;
  long long step = 0;
  ParamSet m;
  ParamSet v;

  static AdamState init(const ParamSet& shape, const AdamConfig& config);
};

// One Adam update with bias correction; weight decay is decoupled, applied as
// an extra update term lr * wd * w outside the moment estimates.
void adam_step(ParamSet& params, AdamState& state, const ParamSet& grads);

}  // namespace fedscope::numerics
