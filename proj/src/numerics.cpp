#include "fedscope/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"

namespace fedscope::numerics {

void ModelSpec::validate() const {
  if (input_dim < 1) throw validation_error("model input dimension must be >= 1");
  if (classes < 2) throw validation_error("model must have at least 2 output classes");
  for (int h : hidden) {
    if (h < 1) throw validation_error("hidden widths must be >= 1");
  }
}

std::vector<std::pair<int, int>> ModelSpec::layer_dims() const {
  std::vector<std::pair<int, int>> dims;
  int in = input_dim;
  for (int h : hidden) {
    dims.emplace_back(in, h);
    in = h;
  }
  dims.emplace_back(in, classes);
  return dims;
}

std::int64_t ModelSpec::param_count() const {
  std::int64_t n = 0;
  for (auto [in, out] : layer_dims()) n += static_cast<std::int64_t>(in) * out + out;
  return n;
}

double ModelSpec::forward_flops_per_sample() const {
  double flops = 0.0;
  for (auto [in, out] : layer_dims()) flops += 2.0 * in * out;
  return flops;
}

std::int64_t ParamSet::coord_count() const {
  std::int64_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::int64_t>(l.w.size()) + l.b.size();
  return n;
}

bool ParamSet::all_finite() const {
  for (const Layer& l : layers) {
    for (double v : l.w)
      if (!std::isfinite(v)) return false;
    for (double v : l.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

double ParamSet::get_coord(std::int64_t flat) const {
  for (const Layer& l : layers) {
    if (flat < static_cast<std::int64_t>(l.w.size())) return l.w[flat];
    flat -= static_cast<std::int64_t>(l.w.size());
    if (flat < static_cast<std::int64_t>(l.b.size())) return l.b[flat];
    flat -= static_cast<std::int64_t>(l.b.size());
  }
  throw dimension_error("flat coordinate out of range");
}

void ParamSet::set_coord(std::int64_t flat, double value) {
  for (Layer& l : layers) {
    if (flat < static_cast<std::int64_t>(l.w.size())) {
      l.w[flat] = value;
      return;
    }
    flat -= static_cast<std::int64_t>(l.w.size());
    if (flat < static_cast<std::int64_t>(l.b.size())) {
      l.b[flat] = value;
      return;
    }
    flat -= static_cast<std::int64_t>(l.b.size());
  }
  throw dimension_error("flat coordinate out of range");
}

bool same_shape(const ParamSet& a, const ParamSet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].in != b.layers[i].in || a.layers[i].out != b.layers[i].out) return false;
  }
  return true;
}

void check_same_shape(const ParamSet& a, const ParamSet& b) {
  if (!same_shape(a, b)) throw dimension_error("parameter sets have different shape signatures");
}

ParamSet zeros_like(const ParamSet& shape) {
  ParamSet out;
  out.layers.reserve(shape.layers.size());
  for (const Layer& l : shape.layers) {
    Layer z;
    z.in = l.in;
    z.out = l.out;
    z.w.assign(l.w.size(), 0.0);
    z.b.assign(l.b.size(), 0.0);
    out.layers.push_back(std::move(z));
  }
  return out;
}

void add_scaled(ParamSet& dst, const ParamSet& src, double factor) {
  check_same_shape(dst, src);
  for (std::size_t i = 0; i < dst.layers.size(); ++i) {
    Layer& d = dst.layers[i];
    const Layer& s = src.layers[i];
    for (std::size_t j = 0; j < d.w.size(); ++j) d.w[j] += factor * s.w[j];
    for (std::size_t j = 0; j < d.b.size(); ++j) d.b[j] += factor * s.b[j];
  }
}

ParamSet difference(const ParamSet& a, const ParamSet& b) {
  check_same_shape(a, b);
  ParamSet out = a;
  add_scaled(out, b, -1.0);
  return out;
}

double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  check_same_shape(a, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    for (std::size_t j = 0; j < a.layers[i].w.size(); ++j)
      worst = std::max(worst, std::abs(a.layers[i].w[j] - b.layers[i].w[j]));
    for (std::size_t j = 0; j < a.layers[i].b.size(); ++j)
      worst = std::max(worst, std::abs(a.layers[i].b[j] - b.layers[i].b[j]));
  }
  return worst;
}

bool bit_identical(const ParamSet& a, const ParamSet& b) {
  if (!same_shape(a, b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const Layer& x = a.layers[i];
    const Layer& y = b.layers[i];
    if (std::memcmp(x.w.data(), y.w.data(), x.w.size() * sizeof(double)) != 0) return false;
    if (std::memcmp(x.b.data(), y.b.data(), x.b.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

ParamSet weighted_average(const std::vector<const ParamSet*>& sets,
                          const std::vector<double>& weights) {
  if (sets.empty()) throw validation_error("cannot average an empty set of parameters");
  if (sets.size() != weights.size())
    throw dimension_error("weight count does not match parameter set count");
  ParamSet out = *sets[0];
  // Anchoring at the first set makes the all-identical case exact and keeps
  // the reduction order fixed.
  for (std::size_t i = 1; i < sets.size(); ++i) {
    check_same_shape(out, *sets[i]);
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      Layer& d = out.layers[l];
      const Layer& s = sets[i]->layers[l];
      const Layer& a = sets[0]->layers[l];
      for (std::size_t j = 0; j < d.w.size(); ++j) d.w[j] += weights[i] * (s.w[j] - a.w[j]);
      for (std::size_t j = 0; j < d.b.size(); ++j) d.b[j] += weights[i] * (s.b[j] - a.b[j]);
    }
  }
  return out;
}

ParamSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  rng::Stream stream(seed);
  ParamSet params;
  for (auto [in, out] : spec.layer_dims()) {
    Layer l;
    l.in = in;
    l.out = out;
    l.w.resize(static_cast<std::size_t>(in) * out);
    l.b.assign(out, 0.0);
    double scale = std::sqrt(2.0 / in);
    for (double& w : l.w) w = scale * stream.next_gaussian();
    params.layers.push_back(std::move(l));
  }
  return params;
}

namespace {

// Affine map plus optional rectifier, row-major everywhere.
void affine_forward(const Layer& l, const Matrix& in, Matrix& out, bool rectify) {
  out = Matrix(in.rows, l.out);
  for (int r = 0; r < in.rows; ++r) {
    const double* x = &in.data[static_cast<std::size_t>(r) * in.cols];
    double* y = &out.data[static_cast<std::size_t>(r) * l.out];
    for (int o = 0; o < l.out; ++o) y[o] = l.b[o];
    for (int i = 0; i < l.in; ++i) {
      double xi = x[i];
      const double* wrow = &l.w[static_cast<std::size_t>(i) * l.out];
      for (int o = 0; o < l.out; ++o) y[o] += xi * wrow[o];
    }
    if (rectify) {
      for (int o = 0; o < l.out; ++o) y[o] = y[o] > 0.0 ? y[o] : 0.0;
    }
  }
}

void check_batch(const ParamSet& params, const Matrix& batch) {
  if (params.layers.empty()) throw dimension_error("parameter set has no layers");
  if (batch.cols != params.layers.front().in)
    throw dimension_error("batch has " + std::to_string(batch.cols) +
                          " features, model expects " +
                          std::to_string(params.layers.front().in));
}

// activations[0] = batch, activations[l+1] = output of layer l (rectified on
// hidden layers, raw logits on the last).
void forward_all(const ParamSet& params, const Matrix& batch,
                 std::vector<Matrix>& activations) {
  check_batch(params, batch);
  activations.clear();
  activations.reserve(params.layers.size() + 1);
  activations.push_back(batch);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix next;
    bool hidden = l + 1 < params.layers.size();
    affine_forward(params.layers[l], activations.back(), next, hidden);
    activations.push_back(std::move(next));
  }
}

void check_labels(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows)
    throw dimension_error("label count does not match batch rows");
  for (int y : labels) {
    if (y < 0 || y >= logits.cols)
      throw validation_error("label " + std::to_string(y) + " outside [0, " +
                             std::to_string(logits.cols) + ")");
  }
}

void check_smoothing(double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0))
    throw validation_error("label smoothing must lie in [0, 1)");
}

}  // namespace

Matrix forward(const ParamSet& params, const Matrix& batch) {
  std::vector<Matrix> activations;
  forward_all(params, batch, activations);
  return std::move(activations.back());
}

double loss_smoothed_ce(const Matrix& logits, const std::vector<int>& labels,
                        double smoothing) {
  check_labels(logits, labels);
  check_smoothing(smoothing);
  int k = logits.cols;
  double total = 0.0;
  for (int r = 0; r < logits.rows; ++r) {
    const double* z = &logits.data[static_cast<std::size_t>(r) * k];
    double zmax = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(z[c] - zmax);
    double lse = zmax + std::log(sum);
    // loss = lse - sum_k y[k]*z[k] with y = (1-s)*onehot + s/K
    double dot = (1.0 - smoothing) * z[labels[r]];
    double uniform = 0.0;
    for (int c = 0; c < k; ++c) uniform += z[c];
    dot += smoothing / k * uniform;
    total += lse - dot;
  }
  return total / logits.rows;
}

ParamSet gradient(const ParamSet& params, const Matrix& batch,
                  const std::vector<int>& labels, double smoothing,
                  const Proximal* prox, double* loss_out) {
  std::vector<Matrix> activations;
  forward_all(params, batch, activations);
  const Matrix& logits = activations.back();
  check_labels(logits, labels);
  check_smoothing(smoothing);
  if (prox != nullptr) {
    if (prox->mu < 0.0) throw validation_error("proximal coefficient must be >= 0");
    if (prox->anchor == nullptr) throw validation_error("proximal term needs an anchor");
    check_same_shape(params, *prox->anchor);
  }

  int n = batch.rows;
  int k = logits.cols;

  // delta = (softmax(logits) - y) / n
  Matrix delta(n, k);
  double total_loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* z = &logits.data[static_cast<std::size_t>(r) * k];
    double* d = &delta.data[static_cast<std::size_t>(r) * k];
    double zmax = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(z[c] - zmax);
    double lse = zmax + std::log(sum);
    for (int c = 0; c < k; ++c) {
      double p = std::exp(z[c] - lse);
      double y = smoothing / k + (c == labels[r] ? 1.0 - smoothing : 0.0);
      d[c] = (p - y) / n;
      total_loss -= y * (z[c] - lse);
    }
  }
  if (loss_out != nullptr) *loss_out = total_loss / n;

  ParamSet grads = zeros_like(params);
  Matrix upstream = std::move(delta);
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Layer& l = params.layers[li];
    const Matrix& input = activations[li];
    Layer& g = grads.layers[li];

    for (int r = 0; r < n; ++r) {
      const double* x = &input.data[static_cast<std::size_t>(r) * l.in];
      const double* u = &upstream.data[static_cast<std::size_t>(r) * l.out];
      for (int o = 0; o < l.out; ++o) g.b[o] += u[o];
      for (int i = 0; i < l.in; ++i) {
        double xi = x[i];
        if (xi == 0.0) continue;
        double* grow = &g.w[static_cast<std::size_t>(i) * l.out];
        for (int o = 0; o < l.out; ++o) grow[o] += xi * u[o];
      }
    }

    if (li > 0) {
      Matrix down(n, l.in);
      for (int r = 0; r < n; ++r) {
        const double* u = &upstream.data[static_cast<std::size_t>(r) * l.out];
        const double* x = &input.data[static_cast<std::size_t>(r) * l.in];
        double* d = &down.data[static_cast<std::size_t>(r) * l.in];
        for (int i = 0; i < l.in; ++i) {
          // Rectifier derivative: the stored activation is already max(z, 0),
          // so x > 0 identifies the active units.
          if (x[i] <= 0.0) {
            d[i] = 0.0;
            continue;
          }
          const double* wrow = &l.w[static_cast<std::size_t>(i) * l.out];
          double acc = 0.0;
          for (int o = 0; o < l.out; ++o) acc += u[o] * wrow[o];
          d[i] = acc;
        }
      }
      upstream = std::move(down);
    }
  }

  if (prox != nullptr && prox->mu != 0.0) {
    for (std::size_t li = 0; li < grads.layers.size(); ++li) {
      Layer& g = grads.layers[li];
      const Layer& w = params.layers[li];
      const Layer& a = prox->anchor->layers[li];
      for (std::size_t j = 0; j < g.w.size(); ++j) g.w[j] += prox->mu * (w.w[j] - a.w[j]);
      for (std::size_t j = 0; j < g.b.size(); ++j) g.b[j] += prox->mu * (w.b[j] - a.b[j]);
    }
  }
  return grads;
}

AdamConfig replication_profile() {
  AdamConfig config;
  config.lr = 1e-4;
  config.weight_decay = 1e-4;
  return config;
}

AdamState AdamState::init(const ParamSet& shape, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  state.step = 0;
  state.m = zeros_like(shape);
  state.v = zeros_like(shape);
  return state;
}

void adam_step(ParamSet& params, AdamState& state, const ParamSet& grads) {
  check_same_shape(params, grads);
  check_same_shape(params, state.m);
  state.step += 1;
  const AdamConfig& c = state.config;
  double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    Layer& p = params.layers[li];
    const Layer& g = grads.layers[li];
    Layer& m = state.m.layers[li];
    Layer& v = state.v.layers[li];
    auto update = [&](std::vector<double>& pv, const std::vector<double>& gv,
                      std::vector<double>& mv, std::vector<double>& vv) {
      for (std::size_t j = 0; j < pv.size(); ++j) {
        mv[j] = c.beta1 * mv[j] + (1.0 - c.beta1) * gv[j];
        vv[j] = c.beta2 * vv[j] + (1.0 - c.beta2) * gv[j] * gv[j];
        double mhat = mv[j] / bc1;
        double vhat = vv[j] / bc2;
        pv[j] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * pv[j]);
      }
    };
    update(p.w, g.w, m.w, v.w);
    update(p.b, g.b, m.b, v.b);
  }
}

}  // namespace fedscope::numerics
