#include "tot/encoder.hpp"

#include <cmath>

#include "tot/errors.hpp"

namespace tot {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// sigmoid(x W + b), in place on the product.
Matrix dense_sigmoid(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = sigmoid(r[j] + b(0, j));
  }
  return out;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(what) + ": shape " + b.shape_string() + " does not match " +
                        a.shape_string());
  }
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::uint64_t step,
                 const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  auto p = param.values();
  auto g = grad.values();
  auto mm = m.values();
  auto vv = v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    mm[i] = cfg.beta1 * mm[i] + (1.0 - cfg.beta1) * g[i];
    vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = mm[i] / c1;
    const double v_hat = vv[i] / c2;
    p[i] -= cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) + cfg.weight_decay * p[i]);
  }
}

}  // namespace

EncoderShape EncoderParams::shape() const {
  return {w1.rows(), w1.cols(), w2.cols(), prototypes.rows()};
}

EncoderParams zeros_like(const EncoderShape& s) {
  return {Matrix(s.input_dim, s.hidden_dim), Matrix(1, s.hidden_dim),
          Matrix(s.hidden_dim, s.embed_dim), Matrix(1, s.embed_dim),
          Matrix(s.num_prototypes, s.embed_dim)};
}

EncoderParams init_encoder(const EncoderShape& shape, Rng& rng) {
  if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.embed_dim == 0 ||
      shape.num_prototypes == 0) {
    throw ContractError("init_encoder: all dimensions must be positive");
  }
  EncoderParams p = zeros_like(shape);
  auto glorot = [&rng](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& x : w.values()) x = limit * (2.0 * rng.uniform01() - 1.0);
  };
  glorot(p.w1);
  glorot(p.w2);
  for (double& x : p.prototypes.values()) x = rng.normal();
  p.prototypes = l2_normalize_rows(p.prototypes).values;
  return p;
}

EncoderOutput forward(const EncoderParams& params, const Matrix& input) {
  if (input.cols() != params.w1.rows()) {
    throw ContractError("encoder forward: input " + input.shape_string() +
                        " does not match first layer " + params.w1.shape_string());
  }
  EncoderOutput out;
  out.cache.input = input;
  out.cache.hidden = dense_sigmoid(input, params.w1, params.b1);
  out.cache.output = dense_sigmoid(out.cache.hidden, params.w2, params.b2);
  out.embeddings = out.cache.output;
  return out;
}

Matrix embed(const EncoderParams& params, const Matrix& input) {
  if (input.cols() != params.w1.rows()) {
    throw ContractError("encoder embed: input " + input.shape_string() +
                        " does not match first layer " + params.w1.shape_string());
  }
  return dense_sigmoid(dense_sigmoid(input, params.w1, params.b1), params.w2, params.b2);
}

EncoderParams backward(const EncoderParams& params, const ForwardCache& cache,
                       const Matrix& grad_output) {
  check_same_shape(cache.output, grad_output, "encoder backward");
  EncoderParams grads = zeros_like(params.shape());

  // Through the second sigmoid.
  Matrix d_pre2 = grad_output;
  for (std::size_t i = 0; i < d_pre2.size(); ++i) {
    const double z = cache.output.values()[i];
    d_pre2.values()[i] *= z * (1.0 - z);
  }
  grads.w2 = transposed_matmul(cache.hidden, d_pre2);
  for (std::size_t i = 0; i < d_pre2.rows(); ++i)
    for (std::size_t j = 0; j < d_pre2.cols(); ++j) grads.b2(0, j) += d_pre2(i, j);

  Matrix d_hidden = matmul_transposed(d_pre2, params.w2);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) {
    const double h = cache.hidden.values()[i];
    d_hidden.values()[i] *= h * (1.0 - h);
  }
  grads.w1 = transposed_matmul(cache.input, d_hidden);
  for (std::size_t i = 0; i < d_hidden.rows(); ++i)
    for (std::size_t j = 0; j < d_hidden.cols(); ++j) grads.b1(0, j) += d_hidden(i, j);
  return grads;
}

AdamState init_adam(const EncoderShape& shape, const AdamConfig& config) {
  return {config, zeros_like(shape), zeros_like(shape), 0, 0, false};
}

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state) {
  check_same_shape(params.w1, grads.w1, "adam_step w1");
  check_same_shape(params.b1, grads.b1, "adam_step b1");
  check_same_shape(params.w2, grads.w2, "adam_step w2");
  check_same_shape(params.b2, grads.b2, "adam_step b2");
  check_same_shape(params.prototypes, grads.prototypes, "adam_step prototypes");

  ++state.step;
  const AdamConfig& cfg = state.config;
  auto& m = state.first_moment;
  auto& v = state.second_moment;
  adam_update(params.w1, grads.w1, m.w1, v.w1, state.step, cfg);
  adam_update(params.b1, grads.b1, m.b1, v.b1, state.step, cfg);
  adam_update(params.w2, grads.w2, m.w2, v.w2, state.step, cfg);
  adam_update(params.b2, grads.b2, m.b2, v.b2, state.step, cfg);
  if (!state.prototypes_frozen) {
    ++state.prototype_step;
    adam_update(params.prototypes, grads.prototypes, m.prototypes, v.prototypes,
                state.prototype_step, cfg);
  }
}

void freeze_prototypes(AdamState& state, bool frozen) { state.prototypes_frozen = frozen; }

}  // namespace tot
