#pragma once

// The full space-time super-resolution network, assembled from the kernel
// layer in five stages:
//
//   1. extract_features   shared head conv + ResBlocks per input frame
//   2. flti_interpolate   mid-frame feature synthesis between neighbors,
//                         offset-guided deformable sampling + learned blend
//   3. tfe_enhance        refines the synthesized feature with motion cues
//                         from both neighbors
//   4. gstir_global/refine  two ConvLSTM passes: a many-to-one pass distills
//                         the whole sequence into a global cell state, which
//                         seeds a many-to-many pass with a conv residual path
//   5. reconstruct        ResBlocks + staged PixelShuffle upsampling to RGB
//
// girnet_forward maps n low-resolution frames to 2n-1 high-resolution
// frames: every input frame is upscaled and a new frame is synthesized
// between each consecutive pair.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "girnet/attention.hpp"
#include "girnet/autodiff.hpp"
#include "girnet/conv.hpp"
#include "girnet/convlstm.hpp"
#include "girnet/deformable.hpp"
#include "girnet/errors.hpp"
#include "girnet/pixel_shuffle.hpp"
#include "girnet/rng.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

struct ModelConfig {
  int channels = 64;
  int n_res_extract = 9;
  int n_res_recon = 7;
  AttentionKind attention_kind = AttentionKind::frequency;
  int scale = 4;
  bool use_deformable = true;
  bool use_global_residual = true;
  bool gstir_use_global_info = true;
  bool gstir_use_residual = true;

  bool operator==(const ModelConfig&) const = default;

  int upsample_stages() const {
    switch (scale) {
      case 2: return 1;
      case 4: return 2;
      case 8: return 3;
    }
    throw std::invalid_argument("ModelConfig: scale must be 2, 4 or 8, got " +
                                std::to_string(scale));
  }

  void validate() const {
    upsample_stages();
    if (channels < 1 || n_res_extract < 1 || n_res_recon < 1)
      throw std::invalid_argument("ModelConfig: channels and ResBlock counts must be >= 1");
    if (attention_kind != AttentionKind::none && channels % kAttentionReduction != 0)
      throw std::invalid_argument("ModelConfig: channels must be divisible by " +
                                  std::to_string(kAttentionReduction) +
                                  " when attention is enabled");
  }
};

// One named parameter tensor: its path, shape, and initialization rule.
struct ParamSpec {
  std::string path;
  Shape shape;
  bool zero_init;  // biases and offset-producing convs start at zero
};

// The complete parameter table for a configuration, in a fixed order.
// Ablation toggles do not change the table (disabled branches simply leave
// their parameters unused); only attention_kind changes which attention
// tensors exist.
inline std::vector<ParamSpec> girnet_param_specs(const ModelConfig& cfg) {
  cfg.validate();
  const int c = cfg.channels;
  std::vector<ParamSpec> specs;
  auto conv = [&specs](const std::string& path, int c_out, int c_in, int k, bool zero = false,
                       bool bias = true) {
    specs.push_back({path + ".weight", Shape{c_out, c_in, k, k}, zero});
    if (bias) specs.push_back({path + ".bias", Shape{c_out}, true});
  };
  auto res_chain = [&](const std::string& prefix, int count) {
    for (int i = 0; i < count; ++i) {
      const std::string res = prefix + ".res" + std::to_string(i);
      conv(res + ".conv1", c, c, 3);
      conv(res + ".conv2", c, c, 3);
      if (cfg.attention_kind != AttentionKind::none) {
        conv(res + ".att.mlp1", c / kAttentionReduction, c, 1);
        conv(res + ".att.mlp2", c, c / kAttentionReduction, 1);
        if (cfg.attention_kind == AttentionKind::channel_spatial)
          conv(res + ".att.spatial", 1, 2, 7);
      }
    }
  };

  conv("extract.head", c, 3, 3);
  res_chain("extract", cfg.n_res_extract);

  conv("flti.g1", 18, 2 * c, 3, /*zero=*/true);
  conv("flti.g3", 18, 2 * c, 3, /*zero=*/true);
  conv("flti.dconv1", c, c, 3);
  conv("flti.dconv2", c, c, 3);
  conv("flti.alpha", c, c, 1);
  conv("flti.beta", c, c, 1);

  conv("tfe.motion_f", c, 2 * c, 3);
  conv("tfe.motion_b", c, 2 * c, 3);
  conv("tfe.refine1", 2 * c, 5 * c, 1);
  conv("tfe.refine2", c, 2 * c, 1);
  conv("tfe.refine3", c, c, 1);
  conv("tfe.refine4", c, c, 1);

  for (const char* cell : {"gstir.global_cell", "gstir.main_cell"}) {
    conv(std::string(cell) + ".input", 4 * c, c, 3);
    conv(std::string(cell) + ".hidden", 4 * c, c, 3, /*zero=*/false, /*bias=*/false);
  }
  conv("gstir.conv_in", c, c, 3);
  conv("gstir.conv_res", c, c, 3);

  res_chain("recon", cfg.n_res_recon);
  for (int s = 0; s < cfg.upsample_stages(); ++s)
    conv("recon.up" + std::to_string(s), 4 * c, c, 3);
  conv("recon.out", 3, c, 3);
  return specs;
}

template <typename T>
struct GirnetWeights {
  std::map<std::string, Tensor<T>> tensors;

  // Uniform fan-in initialization (variance 1/fan_in) for conv weights, zeros
  // for biases and for the offset-producing convs (so training starts as an
  // ordinary convolution). The conservative gain keeps activations bounded
  // through the residual and gated paths, where a ReLU-calibrated gain
  // compounds into runaway magnitudes. Deterministic given the seed.
  static GirnetWeights init(const ModelConfig& cfg, std::uint64_t seed) {
    GirnetWeights w;
    Rng rng(mix_seed({seed, 0x778899aabbccddeeull}));
    for (const ParamSpec& s : girnet_param_specs(cfg)) {
      if (s.zero_init) {
        w.tensors.emplace(s.path, Tensor<T>::zeros(s.shape));
        continue;
      }
      const int fan_in = s.shape[1] * s.shape[2] * s.shape[3];
      const T bound = static_cast<T>(std::sqrt(3.0 / fan_in));
      w.tensors.emplace(s.path, random_uniform<T>(s.shape, rng, -bound, bound));
    }
    return w;
  }

  // Checks exact agreement between the stored tensors and the table the
  // config demands: every path present exactly once, every shape equal.
  void validate_against(const ModelConfig& cfg) const {
    const std::vector<ParamSpec> specs = girnet_param_specs(cfg);
    if (specs.size() != tensors.size())
      throw std::invalid_argument("GirnetWeights: expected " + std::to_string(specs.size()) +
                                  " parameters, got " + std::to_string(tensors.size()));
    for (const ParamSpec& s : specs) {
      auto it = tensors.find(s.path);
      if (it == tensors.end())
        throw std::invalid_argument("GirnetWeights: missing parameter '" + s.path + "'");
      if (it->second.shape() != s.shape)
        throw std::invalid_argument("GirnetWeights: parameter '" + s.path + "' has shape " +
                                    shape_str(it->second.shape()) + ", expected " +
                                    shape_str(s.shape));
    }
  }
};

// A weight set bound onto a tape as graph leaves, plus typed accessors.
template <typename T>
struct BoundModel {
  Tape<T>* tape = nullptr;
  ModelConfig cfg;
  std::map<std::string, Var<T>> params;

  bool has(const std::string& path) const { return params.count(path) != 0; }

  Var<T> at(const std::string& path) const {
    auto it = params.find(path);
    if (it == params.end())
      throw std::invalid_argument("BoundModel: missing parameter '" + path + "'");
    return it->second;
  }

  ConvRef<T> conv(const std::string& prefix) const {
    ConvRef<T> r;
    r.weight = at(prefix + ".weight");
    if (has(prefix + ".bias")) r.bias = at(prefix + ".bias");
    r.stride = 1;
    r.padding = (tape->value(r.weight.id).dim(2) - 1) / 2;
    return r;
  }

  CellRef<T> cell(const std::string& prefix) const {
    return CellRef<T>{conv(prefix + ".input"), conv(prefix + ".hidden")};
  }

  AttentionRef<T> attention(const std::string& prefix) const {
    AttentionRef<T> r;
    r.kind = cfg.attention_kind;
    r.n_freq = kAttentionFreqCount;
    if (r.kind == AttentionKind::none) return r;
    r.mlp1 = conv(prefix + ".mlp1");
    r.mlp2 = conv(prefix + ".mlp2");
    if (r.kind == AttentionKind::channel_spatial) r.spatial = conv(prefix + ".spatial");
    return r;
  }

  Var<T> zero_state(const Var<T>& like) const {
    const Tensor<T>& v = tape->value(like.id);
    return tape->constant(Tensor<T>::zeros({v.dim(0), cfg.channels, v.dim(2), v.dim(3)}));
  }
};

template <typename T>
BoundModel<T> bind_model(Tape<T>& tape, const GirnetWeights<T>& w, const ModelConfig& cfg,
                         bool requires_grad = true) {
  w.validate_against(cfg);
  BoundModel<T> m;
  m.tape = &tape;
  m.cfg = cfg;
  for (const auto& [name, tensor] : w.tensors)
    m.params.emplace(name, tape.leaf(tensor, requires_grad));
  return m;
}

// ---- stages ----------------------------------------------------------------

// Head conv + ResBlock chain, weights shared across frames.
template <typename T>
std::vector<Var<T>> extract_features(const BoundModel<T>& m, std::span<const Var<T>> frames) {
  if (frames.empty()) throw std::invalid_argument("extract_features: empty frame list");
  for (const Var<T>& f : frames)
    check_same_shape(m.tape->value(f.id), m.tape->value(frames[0].id), "extract_features");
  const ConvRef<T> head = m.conv("extract.head");
  std::vector<Var<T>> out;
  out.reserve(frames.size());
  for (const Var<T>& f : frames) {
    Var<T> x = conv2d(f, head);
    for (int i = 0; i < m.cfg.n_res_extract; ++i) {
      const std::string res = "extract.res" + std::to_string(i);
      x = resblock(x, m.conv(res + ".conv1"), m.conv(res + ".conv2"), m.attention(res + ".att"));
    }
    out.push_back(x);
  }
  return out;
}

// Synthesizes the mid feature between two neighbor features. Offsets for the
// forward direction come from [F_prev, F_next], for the backward direction
// from the reversed concatenation; the two deformably-sampled features are
// blended by learnable 1x1 convs. With use_deformable off the samplers
// degrade to ordinary convolutions and the offset convs are skipped.
template <typename T>
Var<T> flti_interpolate(const BoundModel<T>& m, Var<T> f_prev, Var<T> f_next) {
  check_same_shape(m.tape->value(f_prev.id), m.tape->value(f_next.id), "flti_interpolate");
  Var<T> t_prev, t_next;
  if (m.cfg.use_deformable) {
    Var<T> off1 = conv2d(concat_channels({f_prev, f_next}), m.conv("flti.g1"));
    Var<T> off3 = conv2d(concat_channels({f_next, f_prev}), m.conv("flti.g3"));
    t_prev = deformable_conv2d(f_prev, off1, m.conv("flti.dconv1"));
    t_next = deformable_conv2d(f_next, off3, m.conv("flti.dconv2"));
  } else {
    t_prev = conv2d(f_prev, m.conv("flti.dconv1"));
    t_next = conv2d(f_next, m.conv("flti.dconv2"));
  }
  return add(conv2d(t_prev, m.conv("flti.alpha")), conv2d(t_next, m.conv("flti.beta")));
}

// Residual refinement of the synthesized mid feature using motion cues
// against both neighbors.
template <typename T>
Var<T> tfe_enhance(const BoundModel<T>& m, Var<T> f_mid, Var<T> f_prev, Var<T> f_next) {
  check_same_shape(m.tape->value(f_mid.id), m.tape->value(f_prev.id), "tfe_enhance");
  check_same_shape(m.tape->value(f_mid.id), m.tape->value(f_next.id), "tfe_enhance");
  Var<T> m_f = conv2d(concat_channels({f_mid, f_prev}), m.conv("tfe.motion_f"));
  Var<T> m_b = conv2d(concat_channels({f_mid, f_next}), m.conv("tfe.motion_b"));
  Var<T> u = concat_channels({f_prev, f_next, f_mid, m_f, m_b});
  Var<T> r = conv2d(u, m.conv("tfe.refine1"));
  r = conv2d(leaky_relu(r), m.conv("tfe.refine2"));
  r = conv2d(leaky_relu(r), m.conv("tfe.refine3"));
  r = conv2d(leaky_relu(r), m.conv("tfe.refine4"));
  return add(f_mid, r);
}

// Many-to-one ConvLSTM pass over the feature sequence; the final cell state
// summarizes the whole clip.
template <typename T>
Var<T> gstir_global(const BoundModel<T>& m, std::span<const Var<T>> feats) {
  if (feats.empty()) throw std::invalid_argument("gstir_global: empty sequence");
  const CellRef<T> cell = m.cell("gstir.global_cell");
  Var<T> h = m.zero_state(feats[0]);
  Var<T> c = m.zero_state(feats[0]);
  for (const Var<T>& f : feats) std::tie(h, c) = convlstm_cell(f, h, c, cell);
  return c;
}

// Many-to-many ConvLSTM pass seeded with the global state as initial cell
// state (h starts at zero), with a convolutional residual path per step.
template <typename T>
std::vector<Var<T>> gstir_refine(const BoundModel<T>& m, std::span<const Var<T>> feats,
                                 Var<T> g) {
  if (feats.empty()) throw std::invalid_argument("gstir_refine: empty sequence");
  const Tensor<T>& f0 = m.tape->value(feats[0].id);
  const Tensor<T>& gv = m.tape->value(g.id);
  if (gv.rank() != 4 || gv.dim(0) != f0.dim(0) || gv.dim(1) != m.cfg.channels ||
      gv.dim(2) != f0.dim(2) || gv.dim(3) != f0.dim(3))
    throw std::invalid_argument("gstir_refine: global state " + shape_str(gv.shape()) +
                                " does not match features " + shape_str(f0.shape()));
  const CellRef<T> cell = m.cell("gstir.main_cell");
  const ConvRef<T> conv_in = m.conv("gstir.conv_in");
  const ConvRef<T> conv_res = m.conv("gstir.conv_res");
  Var<T> h = m.zero_state(feats[0]);
  Var<T> c = m.cfg.gstir_use_global_info ? g : m.zero_state(feats[0]);
  std::vector<Var<T>> out;
  out.reserve(feats.size());
  for (const Var<T>& f : feats) {
    Var<T> x = conv2d(f, conv_in);
    std::tie(h, c) = convlstm_cell(x, h, c, cell);
    out.push_back(m.cfg.gstir_use_residual ? add(h, conv2d(x, conv_res)) : h);
  }
  return out;
}

// ResBlocks, optional low-resolution skip add, then staged 2x PixelShuffle
// upsampling and the final conv to RGB.
template <typename T>
Var<T> reconstruct(const BoundModel<T>& m, Var<T> h_t, Var<T> skip) {
  check_same_shape(m.tape->value(h_t.id), m.tape->value(skip.id), "reconstruct");
  Var<T> y = h_t;
  for (int i = 0; i < m.cfg.n_res_recon; ++i) {
    const std::string res = "recon.res" + std::to_string(i);
    y = resblock(y, m.conv(res + ".conv1"), m.conv(res + ".conv2"), m.attention(res + ".att"));
  }
  if (m.cfg.use_global_residual) y = add(y, skip);
  for (int s = 0; s < m.cfg.upsample_stages(); ++s) {
    y = conv2d(y, m.conv("recon.up" + std::to_string(s)));
    y = leaky_relu(pixel_shuffle(y, 2));
  }
  return conv2d(y, m.conv("recon.out"));
}

// End to end: n LR frames (N,3,H,W) -> 2n-1 HR frames (N,3,sH,sW), original
// frames at even output indices, synthesized frames at odd ones.
template <typename T>
std::vector<Var<T>> girnet_forward(const BoundModel<T>& m, std::span<const Var<T>> frames) {
  if (frames.size() < 2)
    throw std::invalid_argument("girnet_forward: need >= 2 frames, got " +
                                std::to_string(frames.size()));
  const std::vector<Var<T>> feats = extract_features(m, frames);
  std::vector<Var<T>> seq;
  seq.reserve(2 * feats.size() - 1);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (i) {
      Var<T> mid = flti_interpolate(m, feats[i - 1], feats[i]);
      seq.push_back(tfe_enhance(m, mid, feats[i - 1], feats[i]));
    }
    seq.push_back(feats[i]);
  }
  Var<T> g = m.cfg.gstir_use_global_info ? gstir_global<T>(m, seq) : m.zero_state(seq[0]);
  const std::vector<Var<T>> hs = gstir_refine<T>(m, seq, g);
  std::vector<Var<T>> out;
  out.reserve(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) out.push_back(reconstruct(m, hs[i], seq[i]));
  return out;
}

// Inference convenience: runs the forward pass on its own tape without
// gradient bookkeeping and returns plain tensors.
template <typename T>
std::vector<Tensor<T>> girnet_infer(const GirnetWeights<T>& w, const ModelConfig& cfg,
                                    std::span<const Tensor<T>> frames) {
  Tape<T> tape;
  BoundModel<T> m = bind_model(tape, w, cfg, /*requires_grad=*/false);
  std::vector<Var<T>> fv;
  fv.reserve(frames.size());
  for (const Tensor<T>& f : frames) fv.push_back(tape.constant(f));
  std::vector<Var<T>> out = girnet_forward<T>(m, fv);
  std::vector<Tensor<T>> result;
  result.reserve(out.size());
  for (const Var<T>& v : out) result.push_back(tape.value(v.id));
  return result;
}

}  // namespace girnet
