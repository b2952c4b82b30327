#pragma once

// Recurrent encoder and attention decoder over time.
//
// All functions are batched: each Tensor row is one independent sample, so a
// 1×d input is the single-window case.

#include <span>
#include <vector>

#include "stan/nn.hpp"
#include "stan/tensor.hpp"

namespace stan {

struct EncoderParams {
  Parameter* u = nullptr;  // d_m × d_e
  Parameter* w = nullptr;  // d_e × d_e
};

struct DecoderParams {
  Parameter* u = nullptr;        // 1 × d_d, projects the fed-back scalar
  Parameter* w = nullptr;        // d_d × d_d, state recurrence
  Parameter* score = nullptr;    // d_d × d_e, general score; null disables attention
  Parameter* combine = nullptr;  // (d_e + d_d) × d_d
  Parameter* out = nullptr;      // d_d × 1

  bool has_attention() const { return score != nullptr; }
};

/// tanh(o·U + h_prev·W).
Tensor encoder_step(const Tensor& o, const Tensor& h_prev,
                    const EncoderParams& p);

struct EncoderCache {
  std::vector<Tensor> inputs;
  std::vector<Tensor> states;  // h_0 .. h_T
};

/// Runs encoder_step from the zero state and returns h_1..h_T.
std::vector<Tensor> encode_sequence(std::span<const Tensor> inputs,
                                    const EncoderParams& p,
                                    EncoderCache* cache = nullptr);

/// Backpropagation through time. grad_states[t] is dL/dh_{t+1} from outside
/// the recurrence; returns dL/d inputs[t].
std::vector<Tensor> encode_sequence_backward(
    std::span<const Tensor> grad_states, const EncoderParams& p,
    const EncoderCache& cache);

struct GlobalAttention {
  Tensor weights;    // B × T
  Tensor context;    // B × d_e
  Tensor projected;  // s·W_score, B × d_e
};

/// Luong general score s·W·h_j, softmax over j, context = Σ_j a_j h_j.
GlobalAttention global_attention(const Tensor& s, std::span<const Tensor> states,
                                 const Parameter& score);

struct DecoderStepCache {
  Tensor y_prev;
  Tensor s_prev;
  Tensor state;      // s_k
  GlobalAttention attention;
  Tensor combined;   // [c_k; s_k]
  Tensor attentional;  // s̃_k
};

struct DecoderStep {
  Tensor y;      // B × 1
  Tensor state;  // B × d_d
};

/// s_k = tanh(y_prev·U_D + s_prev·W_D); s̃_k = tanh([c_k; s_k]·W_C) or s_k
/// without attention; y_k = s̃_k·W_S.
DecoderStep decoder_step(const Tensor& y_prev, const Tensor& s_prev,
                         std::span<const Tensor> states, const DecoderParams& p,
                         DecoderStepCache* cache = nullptr);

struct DecodeCache {
  std::vector<DecoderStepCache> steps;
};

/// Free-running unroll from s_0 = h_T and y_0 = x_last. Returns y_1..y_n,
/// each B × 1.
std::vector<Tensor> decode_horizon(std::span<const Tensor> states,
                                   const Tensor& x_last, std::size_t horizons,
                                   const DecoderParams& p,
                                   DecodeCache* cache = nullptr);

/// Given dL/dy_k for every step, accumulates decoder parameter gradients and
/// returns dL/dh_j for every encoder state (h_T includes the s_0 path).
std::vector<Tensor> decode_horizon_backward(std::span<const Tensor> grad_y,
                                            std::span<const Tensor> states,
                                            const DecoderParams& p,
                                            const DecodeCache& cache);

}  // namespace stan
