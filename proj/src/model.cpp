#include "stan/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stan/error.hpp"
#include "stan/training.hpp"

namespace stan {

std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Stan: return "STAN";
    case ModelVariant::StanSa: return "STANsa";
    case ModelVariant::StanTa: return "STANta";
  }
  return "STAN";
}

ModelVariant parse_variant(std::string_view name) {
  if (name == "STAN") return ModelVariant::Stan;
  if (name == "STANsa") return ModelVariant::StanSa;
  if (name == "STANta") return ModelVariant::StanTa;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected STAN, STANsa or STANta)");
}

StanConfig StanConfig::desk() { return StanConfig{}; }

StanConfig StanConfig::paper() {
  StanConfig c;
  c.d_m = c.d_e = c.d_d = 512;
  c.T = 12;
  c.h = 8;
  c.d_ffn = 2048;
  c.N_x = 6;
  c.epochs = 40;
  c.lr = 0.01;
  return c;
}

StanConfig StanConfig::desk_mini() {
  StanConfig c;
  c.N = 3;
  c.T = 4;
  c.n_max = 2;
  c.d_m = 8;
  c.h = 2;
  c.d_ffn = 16;
  c.d_e = c.d_d = 8;
  c.N_x = 1;
  return c;
}

void StanConfig::validate() const {
  std::string problems;
  auto fail = [&](const std::string& what) {
    problems += problems.empty() ? what : "; " + what;
  };
  if (N == 0) fail("N must be >= 1");
  if (T == 0) fail("T must be >= 1");
  if (n_max == 0) fail("n_max must be >= 1");
  if (target >= N) {
    fail("target " + std::to_string(target) + " must be < N = " +
         std::to_string(N));
  }
  if (d_m == 0 || d_e == 0 || d_d == 0 || d_ffn == 0) {
    fail("d_m, d_e, d_d and d_ffn must be >= 1");
  }
  if (h == 0) {
    fail("h must be >= 1");
  } else if (d_m % h != 0) {
    fail("h = " + std::to_string(h) + " does not divide d_m = " +
         std::to_string(d_m));
  }
  if (N_x == 0) fail("N_x must be >= 1");
  if (d_d != d_e) {
    fail("d_d must equal d_e (the decoder starts from the last encoder state)");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and >= 0");
  if (batch == 0) fail("batch must be >= 1");
  if (!(clip_norm >= 0.0)) fail("clip_norm must be >= 0");
  if (!problems.empty()) throw ConfigError("invalid config: " + problems);
}

Model::Model(const StanConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const RngSeed seed{cfg_.seed};
  auto glorot = [&](const std::string& name, std::size_t r, std::size_t c) {
    return &params_.add(name, glorot_init(r, c, derive_seed(seed, name)));
  };
  auto constant = [&](const std::string& name, std::size_t c, double v) {
    return &params_.add(name, Tensor(1, c, v));
  };

  const std::size_t dm = cfg_.d_m;
  spatial_.embed = glorot("spatial.embed", 1, dm);
  if (cfg_.variant == ModelVariant::StanTa) {
    ta_ffn_.w1 = glorot("spatial.ffn.w1", dm, cfg_.d_ffn);
    ta_ffn_.w2 = glorot("spatial.ffn.w2", cfg_.d_ffn, dm);
  } else {
    const std::size_t dk = dm / cfg_.h;
    for (std::size_t l = 0; l < cfg_.N_x; ++l) {
      const std::string pre = "spatial.layer" + std::to_string(l) + ".";
      SpatialLayerParams layer;
      for (std::size_t i = 0; i < cfg_.h; ++i) {
        const std::string head = pre + "mha.head" + std::to_string(i) + ".";
        layer.mha.wq.push_back(glorot(head + "wq", dm, dk));
        layer.mha.wk.push_back(glorot(head + "wk", dm, dk));
        layer.mha.wv.push_back(glorot(head + "wv", dm, dk));
      }
      layer.mha.w0 = glorot(pre + "mha.w0", dm, dm);
      layer.ffn.w1 = glorot(pre + "ffn.w1", dm, cfg_.d_ffn);
      layer.ffn.w2 = glorot(pre + "ffn.w2", cfg_.d_ffn, dm);
      layer.ln1_gain = constant(pre + "ln1.gain", dm, 1.0);
      layer.ln1_bias = constant(pre + "ln1.bias", dm, 0.0);
      layer.ln2_gain = constant(pre + "ln2.gain", dm, 1.0);
      layer.ln2_bias = constant(pre + "ln2.bias", dm, 0.0);
      spatial_.layers.push_back(std::move(layer));
    }
  }

  encoder_.u = glorot("encoder.u", dm, cfg_.d_e);
  encoder_.w = glorot("encoder.w", cfg_.d_e, cfg_.d_e);

  decoder_.u = glorot("decoder.u", 1, cfg_.d_d);
  decoder_.w = glorot("decoder.w", cfg_.d_d, cfg_.d_d);
  if (cfg_.variant != ModelVariant::StanSa) {
    decoder_.score = glorot("decoder.score", cfg_.d_d, cfg_.d_e);
    decoder_.combine = glorot("decoder.combine", cfg_.d_e + cfg_.d_d, cfg_.d_d);
  }
  decoder_.out = glorot("decoder.out", cfg_.d_d, 1);
}

std::size_t Model::expected_parameter_count(const StanConfig& cfg) {
  const std::size_t dm = cfg.d_m;
  std::size_t n = dm;  // embedding
  if (cfg.variant == ModelVariant::StanTa) {
    n += 2 * dm * cfg.d_ffn;
  } else {
    const std::size_t per_layer =
        3 * cfg.h * dm * (dm / cfg.h) + dm * dm + 2 * dm * cfg.d_ffn + 4 * dm;
    n += cfg.N_x * per_layer;
  }
  n += dm * cfg.d_e + cfg.d_e * cfg.d_e;
  n += cfg.d_d + cfg.d_d * cfg.d_d + cfg.d_d;
  if (cfg.variant != ModelVariant::StanSa) {
    n += cfg.d_d * cfg.d_e + (cfg.d_e + cfg.d_d) * cfg.d_d;
  }
  return n;
}

struct Model::Pass {
  std::size_t batch = 0;
  Tensor x_column;
  SpatialStackCache spatial;
  Tensor embedded;  // STANta
  FfnCache ffn;     // STANta
  std::vector<Tensor> encoder_inputs;
  EncoderCache encoder;
  std::vector<Tensor> states;
  DecodeCache decoder;
};

Tensor Model::run(std::span<const Tensor* const> windows, Pass* pass) const {
  const std::size_t B = windows.size();
  const std::size_t N = cfg_.N;
  const std::size_t T = cfg_.T;
  const std::size_t dm = cfg_.d_m;
  if (B == 0) throw ShapeError("forward: empty batch");
  for (const Tensor* w : windows) {
    if (w->rows() != N || w->cols() != T) {
      throw ShapeError("forward: window " + w->shape_string() +
                       " but config expects " + std::to_string(N) + "x" +
                       std::to_string(T));
    }
  }
  Pass local;
  Pass& p = pass != nullptr ? *pass : local;
  p.batch = B;
  p.encoder_inputs.assign(T, Tensor(B, dm));

  // Rows are ordered timestamp-major: (t·B + b)·N + farm.
  if (cfg_.variant == ModelVariant::StanTa) {
    p.x_column = Tensor(T * B, 1);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        p.x_column[t * B + b] = (*windows[b])(cfg_.target, t);
      }
    }
    p.embedded = embed_timestep(p.x_column, *spatial_.embed);
    const Tensor out = position_wise_ffn(p.embedded, ta_ffn_, &p.ffn);
    for (std::size_t t = 0; t < T; ++t) {
      std::copy_n(out.raw() + t * B * dm, B * dm, p.encoder_inputs[t].raw());
    }
  } else {
    p.x_column = Tensor(T * B * N, 1);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t n = 0; n < N; ++n) {
          p.x_column[(t * B + b) * N + n] = (*windows[b])(n, t);
        }
      }
    }
    const double scale =
        attention_scale(spatial_.layers.front().mha, cfg_.scale_by_dm);
    const Tensor out = spatial_stack_forward(p.x_column, N, spatial_, scale,
                                             pass != nullptr ? &p.spatial : nullptr);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        const auto src = out.row((t * B + b) * N + cfg_.target);
        std::copy(src.begin(), src.end(), p.encoder_inputs[t].row(b).begin());
      }
    }
  }

  p.states = encode_sequence(p.encoder_inputs, encoder_,
                             pass != nullptr ? &p.encoder : nullptr);
  Tensor x_last(B, 1);
  for (std::size_t b = 0; b < B; ++b) x_last[b] = (*windows[b])(cfg_.target, T - 1);
  const std::vector<Tensor> ys =
      decode_horizon(p.states, x_last, cfg_.n_max, decoder_,
                     pass != nullptr ? &p.decoder : nullptr);

  Tensor pred(B, cfg_.n_max);
  for (std::size_t k = 0; k < cfg_.n_max; ++k) {
    for (std::size_t b = 0; b < B; ++b) pred(b, k) = ys[k][b];
  }
  if (!all_finite(pred)) throw NumericError("forward: non-finite prediction");
  return pred;
}

void Model::backward(const Tensor& grad_pred, Pass& p) {
  const std::size_t B = p.batch;
  const std::size_t N = cfg_.N;
  const std::size_t T = cfg_.T;
  const std::size_t dm = cfg_.d_m;

  std::vector<Tensor> grad_y(cfg_.n_max, Tensor(B, 1));
  for (std::size_t k = 0; k < cfg_.n_max; ++k) {
    for (std::size_t b = 0; b < B; ++b) grad_y[k][b] = grad_pred(b, k);
  }
  const std::vector<Tensor> grad_states =
      decode_horizon_backward(grad_y, p.states, decoder_, p.decoder);
  const std::vector<Tensor> grad_inputs =
      encode_sequence_backward(grad_states, encoder_, p.encoder);

  if (cfg_.variant == ModelVariant::StanTa) {
    Tensor grad_out(T * B, dm);
    for (std::size_t t = 0; t < T; ++t) {
      std::copy_n(grad_inputs[t].raw(), B * dm, grad_out.raw() + t * B * dm);
    }
    const Tensor grad_embedded = position_wise_ffn_backward(grad_out, ta_ffn_, p.ffn);
    add_matmul_tn(spatial_.embed->grad, p.x_column, grad_embedded);
  } else {
    Tensor grad_out(T * B * N, dm);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t b = 0; b < B; ++b) {
        const auto src = grad_inputs[t].row(b);
        std::copy(src.begin(), src.end(),
                  grad_out.row((t * B + b) * N + cfg_.target).begin());
      }
    }
    const double scale =
        attention_scale(spatial_.layers.front().mha, cfg_.scale_by_dm);
    spatial_stack_backward(grad_out, N, spatial_, scale, p.spatial);
  }
}

std::vector<double> Model::forward_window(const Tensor& window) const {
  const Tensor* w = &window;
  const Tensor pred = run(std::span<const Tensor* const>(&w, 1), nullptr);
  return {pred.data().begin(), pred.data().end()};
}

Tensor Model::predict(std::span<const Tensor* const> windows) const {
  return run(windows, nullptr);
}

double Model::loss(const Batch& batch, bool with_gradients) {
  const std::size_t B = batch.windows.size();
  if (batch.targets.rows() != B || batch.targets.cols() != cfg_.n_max) {
    throw ShapeError("loss: targets " + batch.targets.shape_string() +
                     " for " + std::to_string(B) + " windows and n_max = " +
                     std::to_string(cfg_.n_max));
  }
  Pass pass;
  const Tensor pred = run(batch.windows, with_gradients ? &pass : nullptr);
  const MseResult mse = mse_loss(pred.data(), batch.targets.data());
  if (with_gradients) {
    // Gradients of this pass are formed from zero and added once, so repeated
    // backward calls accumulate exactly.
    std::vector<Tensor> held;
    held.reserve(params_.size());
    for (auto& [name, p] : params_) {
      held.push_back(p.grad);
      p.zero_grad();
    }
    backward(Tensor(pred.rows(), pred.cols(), mse.grad), pass);
    std::size_t i = 0;
    for (auto& [name, p] : params_) {
      add_inplace(p.grad, held[i++]);
    }
  }
  return mse.loss;
}

}  // namespace stan
