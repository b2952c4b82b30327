#include "stan/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stan/error.hpp"
#include "stan/kernels.hpp"

namespace stan {
namespace {

void check_group(std::size_t rows, std::size_t group, const char* op) {
  if (group == 0 || rows % group != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(rows) +
                     " rows do not split into groups of " +
                     std::to_string(group));
  }
}

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v,
               const char* op) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || q.rows() != k.rows()) {
    throw ShapeError(std::string(op) + ": Q " + q.shape_string() + ", K " +
                     k.shape_string() + ", V " + v.shape_string());
  }
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, double scale) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention_weights: Q " + q.shape_string() + ", K " +
                     k.shape_string());
  }
  return softmax_rows(scaled(matmul_nt(q, k), scale));
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw ShapeError("scaled_dot_attention: Q " + q.shape_string() + ", K " +
                     k.shape_string() + ", V " + v.shape_string());
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return matmul(attention_weights(q, k, scale), v);
}

Tensor grouped_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::size_t group, double scale,
                         GroupedAttentionCache* cache) {
  check_qkv(q, k, v, "grouped_attention");
  check_group(q.rows(), group, "grouped_attention");
  const auto& kern = kernels::active();
  const std::size_t d = q.cols();
  const std::size_t dv = v.cols();
  Tensor weights(q.rows(), group);
  Tensor out(q.rows(), dv);
  std::vector<double> scores(group);
  for (std::size_t base = 0; base < q.rows(); base += group) {
    for (std::size_t r = 0; r < group; ++r) {
      const double* qr = q.raw() + (base + r) * d;
      double mx = -INFINITY;
      for (std::size_t c = 0; c < group; ++c) {
        scores[c] = kern.dot(d, qr, k.raw() + (base + c) * d) * scale;
        mx = std::max(mx, scores[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < group; ++c) {
        scores[c] = std::exp(scores[c] - mx);
        sum += scores[c];
      }
      const double inv = 1.0 / sum;
      double* wr = weights.raw() + (base + r) * group;
      double* orow = out.raw() + (base + r) * dv;
      for (std::size_t c = 0; c < group; ++c) {
        wr[c] = scores[c] * inv;
        kern.axpy(dv, wr[c], v.raw() + (base + c) * dv, orow);
      }
    }
  }
  if (cache != nullptr) cache->weights = std::move(weights);
  return out;
}

AttentionGrads grouped_attention_backward(const Tensor& grad_out,
                                          const Tensor& q, const Tensor& k,
                                          const Tensor& v, std::size_t group,
                                          double scale,
                                          const GroupedAttentionCache& cache) {
  const auto& kern = kernels::active();
  const std::size_t d = q.cols();
  const std::size_t dv = v.cols();
  AttentionGrads g{Tensor::zeros_like(q), Tensor::zeros_like(k),
                   Tensor::zeros_like(v)};
  std::vector<double> dw(group);
  for (std::size_t base = 0; base < q.rows(); base += group) {
    for (std::size_t r = 0; r < group; ++r) {
      const std::size_t row = base + r;
      const double* go = grad_out.raw() + row * dv;
      const double* w = cache.weights.raw() + row * group;
      double inner = 0.0;
      for (std::size_t c = 0; c < group; ++c) {
        dw[c] = kern.dot(dv, go, v.raw() + (base + c) * dv);
        inner += dw[c] * w[c];
        kern.axpy(dv, w[c], go, g.dv.raw() + (base + c) * dv);
      }
      for (std::size_t c = 0; c < group; ++c) {
        const double ds = w[c] * (dw[c] - inner) * scale;
        kern.axpy(d, ds, k.raw() + (base + c) * d, g.dq.raw() + row * d);
        kern.axpy(d, ds, q.raw() + row * d, g.dk.raw() + (base + c) * d);
      }
    }
  }
  return g;
}

double attention_scale(const MultiHeadParams& p, bool scale_by_dm) {
  const std::size_t d = scale_by_dm ? p.model_dim() : p.head_dim();
  return 1.0 / std::sqrt(static_cast<double>(d));
}

Tensor multi_head_attention(const Tensor& input, const MultiHeadParams& p,
                            bool scale_by_dm) {
  return multi_head_forward(input, input.rows(), p,
                            attention_scale(p, scale_by_dm));
}

namespace {

// [W_1 | W_2 | ... | W_h], so one product projects every head at once.
Tensor stacked(const std::vector<Parameter*>& per_head) {
  std::vector<Tensor> parts;
  parts.reserve(per_head.size());
  for (const Parameter* w : per_head) parts.push_back(w->value);
  return concat_cols(parts);
}

void scatter_cols(const Tensor& src, Tensor& dst, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    std::copy(src.row(r).begin(), src.row(r).end(), dst.row(r).begin() + begin);
  }
}

void add_head_grads(const Tensor& stacked_grad, const std::vector<Parameter*>& per_head) {
  const std::size_t dk = per_head.front()->value.cols();
  for (std::size_t i = 0; i < per_head.size(); ++i) {
    add_inplace(per_head[i]->grad, slice_cols(stacked_grad, i * dk, dk));
  }
}

}  // namespace

Tensor multi_head_forward(const Tensor& input, std::size_t group,
                          const MultiHeadParams& p, double scale,
                          MultiHeadCache* cache) {
  if (input.cols() != p.model_dim()) {
    throw ShapeError("multi_head_attention: input " + input.shape_string() +
                     " but d_m = " + std::to_string(p.model_dim()));
  }
  const std::size_t h = p.heads();
  const std::size_t dk = p.head_dim();
  MultiHeadCache local;
  MultiHeadCache& c = cache != nullptr ? *cache : local;
  const Tensor q_all = matmul(input, stacked(p.wq));
  const Tensor k_all = matmul(input, stacked(p.wk));
  const Tensor v_all = matmul(input, stacked(p.wv));
  c.q.resize(h);
  c.k.resize(h);
  c.v.resize(h);
  c.attn.resize(h);
  c.concat = Tensor(input.rows(), h * dk);
  for (std::size_t i = 0; i < h; ++i) {
    c.q[i] = slice_cols(q_all, i * dk, dk);
    c.k[i] = slice_cols(k_all, i * dk, dk);
    c.v[i] = slice_cols(v_all, i * dk, dk);
    scatter_cols(grouped_attention(c.q[i], c.k[i], c.v[i], group, scale, &c.attn[i]),
                 c.concat, i * dk);
  }
  Tensor out = matmul(c.concat, p.w0->value);
  if (cache != nullptr) c.input = input;
  return out;
}

Tensor multi_head_backward(const Tensor& grad_out, std::size_t group,
                           const MultiHeadParams& p, double scale,
                           const MultiHeadCache& cache) {
  const Tensor d_concat = linear_backward(cache.concat, grad_out, *p.w0);
  const std::size_t dk = p.head_dim();
  const std::size_t rows = cache.input.rows();
  Tensor dq(rows, p.model_dim());
  Tensor dk_all(rows, p.model_dim());
  Tensor dv(rows, p.model_dim());
  for (std::size_t i = 0; i < p.heads(); ++i) {
    const AttentionGrads g =
        grouped_attention_backward(slice_cols(d_concat, i * dk, dk), cache.q[i],
                                   cache.k[i], cache.v[i], group, scale, cache.attn[i]);
    scatter_cols(g.dq, dq, i * dk);
    scatter_cols(g.dk, dk_all, i * dk);
    scatter_cols(g.dv, dv, i * dk);
  }
  const Tensor input_t = transpose(cache.input);
  add_head_grads(matmul(input_t, dq), p.wq);
  add_head_grads(matmul(input_t, dk_all), p.wk);
  add_head_grads(matmul(input_t, dv), p.wv);
  Tensor d_input = matmul_nt(dq, stacked(p.wq));
  add_matmul_nt(d_input, dk_all, stacked(p.wk));
  add_matmul_nt(d_input, dv, stacked(p.wv));
  return d_input;
}

Tensor position_wise_ffn(const Tensor& x, const FfnParams& p, FfnCache* cache) {
  if (x.cols() != p.w1->value.rows()) {
    throw ShapeError("position_wise_ffn: input " + x.shape_string() +
                     " with W1 " + p.w1->value.shape_string());
  }
  Tensor pre = matmul(x, p.w1->value);
  Tensor hidden = activate(pre, Activation::Relu);
  Tensor out = matmul(hidden, p.w2->value);
  if (cache != nullptr) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Tensor position_wise_ffn_backward(const Tensor& grad_out, const FfnParams& p,
                                  const FfnCache& cache) {
  Tensor d_hidden = linear_backward(cache.hidden, grad_out, *p.w2);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) {
    if (!(cache.pre_activation[i] > 0.0)) d_hidden[i] = 0.0;
  }
  return linear_backward(cache.input, d_hidden, *p.w1);
}

Tensor spatial_layer_forward(const Tensor& input, const SpatialLayerParams& p,
                             bool scale_by_dm) {
  return spatial_layer_forward(input, input.rows(), p,
                               attention_scale(p.mha, scale_by_dm));
}

Tensor spatial_layer_forward(const Tensor& input, std::size_t group,
                             const SpatialLayerParams& p, double scale,
                             SpatialLayerCache* cache) {
  SpatialLayerCache local;
  SpatialLayerCache& c = cache != nullptr ? *cache : local;
  Tensor attn = add(input, multi_head_forward(input, group, p.mha, scale,
                                              cache != nullptr ? &c.mha : nullptr));
  attn = layer_norm_forward(attn, *p.ln1_gain, *p.ln1_bias, kLayerNormEps,
                            &c.ln1);
  Tensor out = add(attn, position_wise_ffn(attn, p.ffn, &c.ffn));
  return layer_norm_forward(out, *p.ln2_gain, *p.ln2_bias, kLayerNormEps,
                            &c.ln2);
}

Tensor spatial_layer_backward(const Tensor& grad_out, std::size_t group,
                              const SpatialLayerParams& p, double scale,
                              const SpatialLayerCache& cache) {
  const Tensor d_out_pre =
      layer_norm_backward(grad_out, cache.ln2, *p.ln2_gain, *p.ln2_bias);
  Tensor d_attn = add(d_out_pre,
                      position_wise_ffn_backward(d_out_pre, p.ffn, cache.ffn));
  const Tensor d_attn_pre =
      layer_norm_backward(d_attn, cache.ln1, *p.ln1_gain, *p.ln1_bias);
  return add(d_attn_pre,
             multi_head_backward(d_attn_pre, group, p.mha, scale, cache.mha));
}

Tensor embed_timestep(const Tensor& x, const Parameter& embed) {
  if (x.cols() != 1 || embed.value.rows() != 1) {
    throw ShapeError("embed_timestep: input " + x.shape_string() +
                     " with W^I " + embed.value.shape_string());
  }
  return linear_forward(x, embed);
}

Tensor spatial_stack_forward(const Tensor& x, std::size_t group,
                             const SpatialEncoderParams& p, double scale,
                             SpatialStackCache* cache) {
  check_group(x.rows(), group, "spatial_stack_forward");
  Tensor h = embed_timestep(x, *p.embed);
  if (cache != nullptr) {
    cache->input = x;
    cache->layers.resize(p.layers.size());
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    h = spatial_layer_forward(h, group, p.layers[l], scale,
                              cache != nullptr ? &cache->layers[l] : nullptr);
  }
  return h;
}

void spatial_stack_backward(const Tensor& grad_out, std::size_t group,
                            const SpatialEncoderParams& p, double scale,
                            const SpatialStackCache& cache) {
  Tensor g = grad_out;
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    g = spatial_layer_backward(g, group, p.layers[l], scale, cache.layers[l]);
  }
  add_matmul_tn(p.embed->grad, cache.input, g);
}

std::vector<Tensor> spatial_encode(std::span<const Tensor> x_seq,
                                   const SpatialEncoderParams& p,
                                   std::size_t target, bool scale_by_dm) {
  std::vector<Tensor> out;
  out.reserve(x_seq.size());
  const double scale = p.layers.empty()
                           ? 1.0
                           : attention_scale(p.layers.front().mha, scale_by_dm);
  for (const Tensor& x : x_seq) {
    if (target >= x.rows()) {
      throw IndexError("target farm " + std::to_string(target) +
                       " out of range for " + std::to_string(x.rows()) +
                       " farms");
    }
    const Tensor o = spatial_stack_forward(x, x.rows(), p, scale);
    Tensor row(1, o.cols());
    std::copy(o.row(target).begin(), o.row(target).end(), row.row(0).begin());
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace stan
