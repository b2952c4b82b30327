#pragma once

// Spatial self-attention over wind farms.
//
// Every forward function here works on a stack of independent farm sets:
// the input has groups·N rows, and attention only mixes rows inside the same
// block of `group` consecutive rows. A single window at a single timestamp is
// the group == rows case. Weights are shared across all groups.

#include <cstddef>
#include <span>
#include <vector>

#include "stan/nn.hpp"
#include "stan/tensor.hpp"

namespace stan {

struct MultiHeadParams {
  std::vector<Parameter*> wq;  // per head, d_m × d_k
  std::vector<Parameter*> wk;
  std::vector<Parameter*> wv;
  Parameter* w0 = nullptr;  // d_m × d_m

  std::size_t heads() const { return wq.size(); }
  std::size_t model_dim() const { return w0->value.rows(); }
  std::size_t head_dim() const { return wq.front()->value.cols(); }
};

struct FfnParams {
  Parameter* w1 = nullptr;  // d_m × d_ffn
  Parameter* w2 = nullptr;  // d_ffn × d_m
};

struct SpatialLayerParams {
  MultiHeadParams mha;
  FfnParams ffn;
  Parameter* ln1_gain = nullptr;
  Parameter* ln1_bias = nullptr;
  Parameter* ln2_gain = nullptr;
  Parameter* ln2_bias = nullptr;
};

struct SpatialEncoderParams {
  Parameter* embed = nullptr;  // 1 × d_m
  std::vector<SpatialLayerParams> layers;
};

/// softmax(QKᵀ/√d)·V for one farm set, d = Q.cols().
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// The row-stochastic weight matrix softmax(QKᵀ·scale) for one farm set.
Tensor attention_weights(const Tensor& q, const Tensor& k, double scale);

struct GroupedAttentionCache {
  Tensor weights;  // rows × group; row r holds weights over its own group
};

/// Block-diagonal attention over consecutive row groups of size `group`.
Tensor grouped_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::size_t group, double scale,
                         GroupedAttentionCache* cache = nullptr);

struct AttentionGrads {
  Tensor dq, dk, dv;
};

AttentionGrads grouped_attention_backward(const Tensor& grad_out,
                                          const Tensor& q, const Tensor& k,
                                          const Tensor& v, std::size_t group,
                                          double scale,
                                          const GroupedAttentionCache& cache);

/// 1/√d_k normally; 1/√d_m when scale_by_dm selects the literal reading.
double attention_scale(const MultiHeadParams& p, bool scale_by_dm);

struct MultiHeadCache {
  Tensor input;
  std::vector<Tensor> q, k, v;
  std::vector<GroupedAttentionCache> attn;
  Tensor concat;
};

/// Self-attention with Q = K = V = input, projected per head, concatenated
/// and mapped through W0.
Tensor multi_head_attention(const Tensor& input, const MultiHeadParams& p,
                            bool scale_by_dm = false);
Tensor multi_head_forward(const Tensor& input, std::size_t group,
                          const MultiHeadParams& p, double scale,
                          MultiHeadCache* cache = nullptr);
Tensor multi_head_backward(const Tensor& grad_out, std::size_t group,
                           const MultiHeadParams& p, double scale,
                           const MultiHeadCache& cache);

struct FfnCache {
  Tensor input;
  Tensor pre_activation;
  Tensor hidden;
};

/// relu(x·W1)·W2, applied row by row.
Tensor position_wise_ffn(const Tensor& x, const FfnParams& p,
                         FfnCache* cache = nullptr);
Tensor position_wise_ffn_backward(const Tensor& grad_out, const FfnParams& p,
                                  const FfnCache& cache);

struct SpatialLayerCache {
  MultiHeadCache mha;
  LayerNormCache ln1;
  FfnCache ffn;
  LayerNormCache ln2;
};

/// ATTN = LN(I + MultiHead(I)); O = LN(ATTN + FFN(ATTN)).
Tensor spatial_layer_forward(const Tensor& input, const SpatialLayerParams& p,
                             bool scale_by_dm = false);
Tensor spatial_layer_forward(const Tensor& input, std::size_t group,
                             const SpatialLayerParams& p, double scale,
                             SpatialLayerCache* cache = nullptr);
Tensor spatial_layer_backward(const Tensor& grad_out, std::size_t group,
                              const SpatialLayerParams& p, double scale,
                              const SpatialLayerCache& cache);

/// I_t = x_t · W^I, x_t a single column of farm values.
Tensor embed_timestep(const Tensor& x, const Parameter& embed);

struct SpatialStackCache {
  Tensor input;  // the farm-value column
  std::vector<SpatialLayerCache> layers;
};

/// Embeds a column of farm values and runs every layer in order.
Tensor spatial_stack_forward(const Tensor& x, std::size_t group,
                             const SpatialEncoderParams& p, double scale,
                             SpatialStackCache* cache = nullptr);
/// Accumulates all parameter gradients, including the embedding.
void spatial_stack_backward(const Tensor& grad_out, std::size_t group,
                            const SpatialEncoderParams& p, double scale,
                            const SpatialStackCache& cache);

/// Runs the stack independently on each x_t (N×1) and returns the target
/// farm's row O^i_t (1×d_m) for t = 1..T. Throws IndexError when the target
/// is out of range.
std::vector<Tensor> spatial_encode(std::span<const Tensor> x_seq,
                                   const SpatialEncoderParams& p,
                                   std::size_t target, bool scale_by_dm = false);

}  // namespace stan
