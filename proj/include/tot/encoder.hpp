#pragma once

#include <cstddef>
#include <cstdint>

#include "tot/matrix.hpp"
#include "tot/rng.hpp"

namespace tot {

struct EncoderShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t embed_dim = 0;
  std::size_t num_prototypes = 0;
};

// Two sigmoid layers plus the prototype matrix. Biases are stored as 1-row
// matrices so every parameter is handled the same way by the optimizer.
// The same struct carries gradients.
struct EncoderParams {
  Matrix w1;          // input_dim x hidden_dim
  Matrix b1;          // 1 x hidden_dim
  Matrix w2;          // hidden_dim x embed_dim
  Matrix b2;          // 1 x embed_dim
  Matrix prototypes;  // num_prototypes x embed_dim

  EncoderShape shape() const;

  template <typename F>
  void for_each(F&& f) {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
    f(prototypes);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
    f(prototypes);
  }
};

EncoderParams zeros_like(const EncoderShape& shape);

// Glorot-uniform weights, zero biases, unit-Gaussian prototypes normalized to unit rows.
EncoderParams init_encoder(const EncoderShape& shape, Rng& rng);

struct ForwardCache {
  Matrix input;   // B x input_dim
  Matrix hidden;  // sigmoid activations of layer 1
  Matrix output;  // sigmoid activations of layer 2, i.e. Z
};

struct EncoderOutput {
  Matrix embeddings;
  ForwardCache cache;
};

// Z = sigmoid(sigmoid(X W1 + b1) W2 + b2)
EncoderOutput forward(const EncoderParams& params, const Matrix& input);
Matrix embed(const EncoderParams& params, const Matrix& input);

// Gradients of <dZ, Z> w.r.t. w1, b1, w2, b2. The prototype slot is zero.
EncoderParams backward(const EncoderParams& params, const ForwardCache& cache, const Matrix& grad_output);

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  EncoderParams first_moment;
  EncoderParams second_moment;
  std::uint64_t step = 0;
  // Prototypes keep their own counter since they can sit out while frozen.
  std::uint64_t prototype_step = 0;
  bool prototypes_frozen = false;
};

AdamState init_adam(const EncoderShape& shape, const AdamConfig& config);

// Adam with bias correction and decoupled weight decay:
//   p -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * p
void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state);

void freeze_prototypes(AdamState& state, bool frozen);

}  // namespace tot
