#include "stan/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stan/error.hpp"
#include "stan/kernels.hpp"

namespace stan {
namespace {

// dL/dpre for y = tanh(pre), given dL/dy and y.
Tensor tanh_backward(const Tensor& grad, const Tensor& y) {
  Tensor out = grad;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.0 - y[i] * y[i];
  return out;
}

}  // namespace

Tensor encoder_step(const Tensor& o, const Tensor& h_prev,
                    const EncoderParams& p) {
  if (o.rows() != h_prev.rows()) {
    throw ShapeError("encoder_step: input " + o.shape_string() + " and state " +
                     h_prev.shape_string());
  }
  Tensor pre = matmul(o, p.u->value);
  add_matmul(pre, h_prev, p.w->value);
  return activate(pre, Activation::Tanh);
}

std::vector<Tensor> encode_sequence(std::span<const Tensor> inputs,
                                    const EncoderParams& p,
                                    EncoderCache* cache) {
  if (inputs.empty()) throw ShapeError("encode_sequence: empty sequence");
  std::vector<Tensor> states;
  states.reserve(inputs.size());
  Tensor h(inputs.front().rows(), p.w->value.rows());
  if (cache != nullptr) {
    cache->inputs.assign(inputs.begin(), inputs.end());
    cache->states.clear();
    cache->states.push_back(h);
  }
  for (const Tensor& o : inputs) {
    h = encoder_step(o, h, p);
    states.push_back(h);
    if (cache != nullptr) cache->states.push_back(h);
  }
  return states;
}

std::vector<Tensor> encode_sequence_backward(
    std::span<const Tensor> grad_states, const EncoderParams& p,
    const EncoderCache& cache) {
  const std::size_t steps = cache.inputs.size();
  std::vector<Tensor> grad_inputs(steps);
  Tensor carry = Tensor::zeros_like(cache.states.front());
  for (std::size_t t = steps; t-- > 0;) {
    Tensor g = add(grad_states[t], carry);
    const Tensor pre = tanh_backward(g, cache.states[t + 1]);
    add_matmul_tn(p.u->grad, cache.inputs[t], pre);
    add_matmul_tn(p.w->grad, cache.states[t], pre);
    grad_inputs[t] = matmul_nt(pre, p.u->value);
    carry = matmul_nt(pre, p.w->value);
  }
  return grad_inputs;
}

GlobalAttention global_attention(const Tensor& s, std::span<const Tensor> states,
                                 const Parameter& score) {
  if (states.empty()) throw ShapeError("global_attention: no encoder states");
  const std::size_t batch = s.rows();
  const std::size_t de = score.value.cols();
  for (const Tensor& h : states) {
    if (h.rows() != batch || h.cols() != de) {
      throw ShapeError("global_attention: state " + h.shape_string() +
                       " does not match query " + s.shape_string() +
                       " under W_score " + score.value.shape_string());
    }
  }
  const auto& kern = kernels::active();
  GlobalAttention out;
  out.projected = matmul(s, score.value);
  Tensor scores(batch, states.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      scores(b, j) = kern.dot(de, out.projected.raw() + b * de,
                              states[j].raw() + b * de);
    }
  }
  out.weights = softmax_rows(scores);
  out.context = Tensor(batch, de);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      kern.axpy(de, out.weights(b, j), states[j].raw() + b * de,
                out.context.raw() + b * de);
    }
  }
  return out;
}

DecoderStep decoder_step(const Tensor& y_prev, const Tensor& s_prev,
                         std::span<const Tensor> states, const DecoderParams& p,
                         DecoderStepCache* cache) {
  if (y_prev.cols() != 1 || y_prev.rows() != s_prev.rows()) {
    throw ShapeError("decoder_step: previous output " + y_prev.shape_string() +
                     " and state " + s_prev.shape_string());
  }
  Tensor pre = matmul(y_prev, p.u->value);
  add_matmul(pre, s_prev, p.w->value);
  Tensor state = activate(pre, Activation::Tanh);

  GlobalAttention attention;
  Tensor combined;
  Tensor attentional;
  if (p.has_attention()) {
    attention = global_attention(state, states, *p.score);
    combined = concat_cols(attention.context, state);
    attentional = activate(matmul(combined, p.combine->value), Activation::Tanh);
  } else {
    attentional = state;
  }
  Tensor y = matmul(attentional, p.out->value);
  if (cache != nullptr) {
    cache->y_prev = y_prev;
    cache->s_prev = s_prev;
    cache->state = state;
    cache->attention = std::move(attention);
    cache->combined = std::move(combined);
    cache->attentional = std::move(attentional);
  }
  return {std::move(y), std::move(state)};
}

std::vector<Tensor> decode_horizon(std::span<const Tensor> states,
                                   const Tensor& x_last, std::size_t horizons,
                                   const DecoderParams& p, DecodeCache* cache) {
  if (horizons == 0) throw ShapeError("decode_horizon: horizon count is zero");
  if (states.empty()) throw ShapeError("decode_horizon: no encoder states");
  std::vector<Tensor> ys;
  ys.reserve(horizons);
  if (cache != nullptr) cache->steps.assign(horizons, {});
  Tensor y = x_last;
  Tensor s = states.back();
  for (std::size_t k = 0; k < horizons; ++k) {
    DecoderStep step = decoder_step(y, s, states, p,
                                    cache != nullptr ? &cache->steps[k] : nullptr);
    y = step.y;
    s = std::move(step.state);
    ys.push_back(std::move(step.y));
  }
  return ys;
}

std::vector<Tensor> decode_horizon_backward(std::span<const Tensor> grad_y,
                                            std::span<const Tensor> states,
                                            const DecoderParams& p,
                                            const DecodeCache& cache) {
  const auto& kern = kernels::active();
  const std::size_t steps = cache.steps.size();
  const std::size_t batch = states.front().rows();
  const std::size_t de = states.front().cols();
  const std::size_t dd = p.w->value.rows();
  std::vector<Tensor> grad_states;
  grad_states.reserve(states.size());
  for (const Tensor& h : states) grad_states.push_back(Tensor::zeros_like(h));

  Tensor carry_s(batch, dd);
  Tensor carry_y(batch, 1);
  for (std::size_t k = steps; k-- > 0;) {
    const DecoderStepCache& c = cache.steps[k];
    const Tensor dy = add(grad_y[k], carry_y);
    const Tensor d_attentional = linear_backward(c.attentional, dy, *p.out);

    Tensor ds;
    if (p.has_attention()) {
      const Tensor d_pre = tanh_backward(d_attentional, c.attentional);
      const Tensor d_combined = linear_backward(c.combined, d_pre, *p.combine);
      const Tensor d_context = slice_cols(d_combined, 0, de);
      ds = slice_cols(d_combined, de, dd);

      // Through c = Σ a_j h_j and a = softmax(P·h_j), P = s·W_score.
      const GlobalAttention& att = c.attention;
      Tensor d_projected(batch, de);
      std::vector<double> da(states.size());
      for (std::size_t b = 0; b < batch; ++b) {
        const double* dc = d_context.raw() + b * de;
        double inner = 0.0;
        for (std::size_t j = 0; j < states.size(); ++j) {
          da[j] = kern.dot(de, dc, states[j].raw() + b * de);
          inner += da[j] * att.weights(b, j);
          kern.axpy(de, att.weights(b, j), dc, grad_states[j].raw() + b * de);
        }
        for (std::size_t j = 0; j < states.size(); ++j) {
          const double dscore = att.weights(b, j) * (da[j] - inner);
          kern.axpy(de, dscore, states[j].raw() + b * de,
                    d_projected.raw() + b * de);
          kern.axpy(de, dscore, att.projected.raw() + b * de,
                    grad_states[j].raw() + b * de);
        }
      }
      add_inplace(ds, linear_backward(c.state, d_projected, *p.score));
    } else {
      ds = d_attentional;
    }
    add_inplace(ds, carry_s);
    const Tensor d_pre_s = tanh_backward(ds, c.state);
    add_matmul_tn(p.u->grad, c.y_prev, d_pre_s);
    add_matmul_tn(p.w->grad, c.s_prev, d_pre_s);
    carry_y = matmul_nt(d_pre_s, p.u->value);
    carry_s = matmul_nt(d_pre_s, p.w->value);
  }
  add_inplace(grad_states.back(), carry_s);
  return grad_states;
}

}  // namespace stan
