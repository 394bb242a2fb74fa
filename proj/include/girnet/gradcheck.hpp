#pragma once

// Finite-difference gradient verification.
//
// finite_diff_check builds a scalar loss twice: once with leaf variables to
// get reverse-mode gradients, then repeatedly with perturbed constant inputs
// to get central differences. The reported error for a component pair (a, c)
// is |a - c| / (|a| + |c| + 1e-12), maximized over all checked components.
//
// gradcheck_suite packages one deterministic mini-problem per differentiable
// op, each run over several seeds in double precision. Non-smooth ops
// (bilinear sampling, deformable offsets, relu) draw their inputs with a
// margin away from the kink sets, since central differences straddle them.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "girnet/attention.hpp"
#include "girnet/autodiff.hpp"
#include "girnet/conv.hpp"
#include "girnet/convlstm.hpp"
#include "girnet/deformable.hpp"
#include "girnet/metrics.hpp"
#include "girnet/model.hpp"
#include "girnet/pixel_shuffle.hpp"
#include "girnet/pooling.hpp"
#include "girnet/rng.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

inline double fd_rel_err(double analytic, double central) {
  return std::abs(analytic - central) / (std::abs(analytic) + std::abs(central) + 1e-12);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

using BuildFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

struct FdOptions {
  double h = 1e-5;
  int max_components = -1;  // per input tensor; -1 checks every component
  std::uint64_t pick_seed = 1;
  // When sampling, prefer components whose analytic gradient magnitude is at
  // least this. A central difference of a scalar L carries absolute noise
  // around ulp(L)/h, so components far below that floor measure rounding
  // error, not the Jacobian.
  double min_grad_mag = 0.0;
};

// Max relative error between reverse-mode gradients and central differences
// of the scalar built by `f` from `inputs`.
inline double finite_diff_check(const BuildFn& f, const std::vector<Tensor<double>>& inputs,
                                FdOptions opt = {}) {
  if (!(opt.h > 0)) throw std::invalid_argument("finite_diff_check: step h must be > 0");
  if (inputs.empty()) throw std::invalid_argument("finite_diff_check: no inputs");

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(inputs.size());
    for (const Tensor<double>& x : inputs) vars.push_back(tape.leaf(x, true));
    Var<double> loss = f(tape, vars);
    if (loss.value().numel() != 1)
      throw std::invalid_argument("finite_diff_check: loss must be scalar, got shape " +
                                  shape_str(loss.value().shape()));
    tape.backward(loss);
    for (const Var<double>& v : vars) analytic.push_back(tape.grad(v));
  }

  auto eval = [&](const std::vector<Tensor<double>>& at) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(at.size());
    for (const Tensor<double>& x : at) vars.push_back(tape.leaf(x, false));
    return static_cast<double>(f(tape, vars).value()[0]);
  };

  double worst = 0;
  std::vector<Tensor<double>> work = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t n = inputs[k].numel();
    std::vector<std::size_t> picks;
    if (opt.max_components < 0 || static_cast<std::size_t>(opt.max_components) >= n) {
      picks.resize(n);
      for (std::size_t i = 0; i < n; ++i) picks[i] = i;
    } else {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < n; ++i)
        if (std::abs(analytic[k][i]) >= opt.min_grad_mag) pool.push_back(i);
      Rng rng(mix_seed({opt.pick_seed, k, 0x9E3779B9ull}));
      if (pool.size() <= static_cast<std::size_t>(opt.max_components)) {
        picks = std::move(pool);
        if (picks.empty() && n > 0) {
          // nothing above the floor: check the largest component anyway
          std::size_t best = 0;
          for (std::size_t i = 1; i < n; ++i)
            if (std::abs(analytic[k][i]) > std::abs(analytic[k][best])) best = i;
          picks.push_back(best);
        }
      } else {
        for (int i = 0; i < opt.max_components; ++i)
          picks.push_back(pool[rng.uniform_int(pool.size())]);
      }
    }
    for (std::size_t j : picks) {
      const double orig = work[k][j];
      work[k][j] = orig + opt.h;
      const double up = eval(work);
      work[k][j] = orig - opt.h;
      const double down = eval(work);
      work[k][j] = orig;
      const double central = (up - down) / (2.0 * opt.h);
      worst = std::max(worst, fd_rel_err(analytic[k][j], central));
    }
  }
  return worst;
}

// Single-input convenience form.
inline double finite_diff_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                                const Tensor<double>& x, double h = 1e-5) {
  return finite_diff_check(
      [&f](Tape<double>& t, std::span<const Var<double>> v) { return f(t, v[0]); }, {x},
      FdOptions{.h = h});
}

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  double tolerance = 0;
  int seeds = 0;
  bool pass = false;
};

namespace detail {

inline Tensor<double> draw(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  return random_uniform<double>(std::move(shape), rng, lo, hi);
}

// Values in +-[margin, 1]: keeps relu/max inputs away from their kinks.
inline Tensor<double> draw_off_zero(Rng& rng, Shape shape, double margin = 0.1) {
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double mag = margin + (1.0 - margin) * rng.uniform();
    t[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Random projection: reduces a tensor-valued output to a scalar so the
// harness checks a full vector-Jacobian product.
inline Var<double> project(Tape<double>& t, Var<double> out, std::uint64_t seed) {
  Rng rng(mix_seed({seed, 0x70726F6Aull}));
  Var<double> r = t.constant(draw(rng, out.value().shape(), 0.25, 1.0));
  return sum(mul(out, r));
}

using SeedFn = std::function<double(std::uint64_t)>;

inline double run_seeds(const SeedFn& f, int seeds, std::uint64_t tag) {
  double worst = 0;
  for (int s = 0; s < seeds; ++s) worst = std::max(worst, f(mix_seed({tag, static_cast<std::uint64_t>(s)})));
  return worst;
}

}  // namespace detail

// One deterministic finite-difference problem per differentiable op; returns
// entries for every op whose name contains `only` (all ops when empty).
inline std::vector<GradCheckEntry> gradcheck_suite(const std::string& only = "", int seeds = 5) {
  std::vector<GradCheckEntry> results;

  auto entry = [&](const std::string& name, double tol, const detail::SeedFn& fn) {
    if (!only.empty() && name.find(only) == std::string::npos) return;
    GradCheckEntry e;
    e.name = name;
    e.tolerance = tol;
    e.seeds = seeds;
    e.max_rel_err = detail::run_seeds(fn, seeds, fnv1a(name));
    e.pass = e.max_rel_err < tol;
    results.push_back(std::move(e));
  };

  using detail::draw;
  using detail::draw_off_zero;
  using detail::project;

  entry("elementwise_add", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, add(v[0], v[1]), s);
        },
        {draw(rng, {2, 3, 4, 2}), draw(rng, {2, 3, 4, 2})});
  });
  entry("elementwise_sub", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, sub(v[0], v[1]), s);
        },
        {draw(rng, {3, 5}), draw(rng, {3, 5})});
  });
  entry("elementwise_mul", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, mul(v[0], v[1]), s);
        },
        {draw(rng, {4, 6}), draw(rng, {4, 6})});
  });
  entry("scale", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, scale(v[0], 1.7), s);
        },
        {draw(rng, {2, 7})});
  });
  entry("sigmoid", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, sigmoid(v[0]), s);
        },
        {draw(rng, {3, 4, 5}, -2.0, 2.0)});
  });
  entry("tanh", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) { return project(t, tanh(v[0]), s); },
        {draw(rng, {3, 4, 5}, -2.0, 2.0)});
  });
  entry("relu", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) { return project(t, relu(v[0]), s); },
        {draw_off_zero(rng, {4, 5, 3})});
  });
  entry("leaky_relu", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, leaky_relu(v[0]), s);
        },
        {draw_off_zero(rng, {4, 5, 3})});
  });
  entry("sin", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) { return project(t, sin(v[0]), s); },
        {draw(rng, {6, 4}, -3.0, 3.0)});
  });
  entry("sum", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [](Tape<double>& t, std::span<const Var<double>> v) { return sum(v[0]); },
        {draw(rng, {2, 3, 4})});
  });
  entry("concat_channels", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, concat_channels({v[0], v[1], v[2]}), s);
        },
        {draw(rng, {2, 2, 3, 4}), draw(rng, {2, 3, 3, 4}), draw(rng, {2, 1, 3, 4})});
  });
  entry("slice_channels", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, slice_channels(v[0], 1, 4), s);
        },
        {draw(rng, {2, 5, 3, 4})});
  });

  entry("conv2d", 1e-5, [](std::uint64_t s) {
    Rng rng(s);
    double worst = 0;
    struct Case { Shape x, w; int stride, pad; };
    const Case cases[] = {{{2, 3, 6, 5}, {4, 3, 3, 3}, 1, 1},
                          {{1, 2, 7, 7}, {3, 2, 3, 3}, 2, 0},
                          {{2, 4, 5, 5}, {6, 4, 1, 1}, 1, 0}};
    for (const Case& c : cases) {
      worst = std::max(
          worst, finite_diff_check(
                     [s, &c](Tape<double>& t, std::span<const Var<double>> v) {
                       return project(t, conv2d(v[0], v[1], v[2], c.stride, c.pad), s);
                     },
                     {draw(rng, c.x), draw(rng, c.w), draw(rng, {c.w[0]})}));
    }
    return worst;
  });

  entry("bilinear_sample", 1e-5, [](std::uint64_t s) {
    Rng rng(s);
    Tensor<double> x = draw(rng, {1, 2, 5, 6});
    // Fractional parts land in [0.3, 0.7]: a safe margin from the bilinear
    // kinks at integer coordinates.
    Tensor<double> coords({1, 2, 4, 4});
    for (std::size_t i = 0; i < coords.numel(); ++i)
      coords[i] = std::floor(rng.uniform(-1.0, 5.0)) + 0.3 + rng.uniform() * 0.4;
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, bilinear_sample(v[0], v[1]), s);
        },
        {std::move(x), std::move(coords)});
  });

  entry("deformable_conv2d", 1e-4, [](std::uint64_t s) {
    Rng rng(s);
    Tensor<double> off({1, 18, 5, 5});
    for (std::size_t i = 0; i < off.numel(); ++i) {
      const double mag = 0.15 + rng.uniform() * 0.3;
      off[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, deformable_conv2d(v[0], v[1], v[2], v[3]), s);
        },
        {draw(rng, {1, 3, 5, 5}), std::move(off), draw(rng, {2, 3, 3, 3}, -0.5, 0.5),
         draw(rng, {2})});
  });

  entry("pixel_shuffle", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          return project(t, pixel_shuffle(v[0], 2), s);
        },
        {draw(rng, {2, 8, 3, 4})});
  });

  entry("attention_apply", 1e-4, [](std::uint64_t s) {
    Rng rng(s);
    double worst = 0;
    for (AttentionKind kind : {AttentionKind::channel_spatial, AttentionKind::frequency}) {
      std::vector<Tensor<double>> inputs = {
          draw_off_zero(rng, {2, 8, 6, 5}, 0.05), draw(rng, {2, 8, 1, 1}, -0.5, 0.5),
          draw(rng, {2}),   draw(rng, {8, 2, 1, 1}, -0.5, 0.5),
          draw(rng, {8}),   draw(rng, {1, 2, 7, 7}, -0.3, 0.3),
          draw(rng, {1})};
      worst = std::max(
          worst,
          finite_diff_check(
              [s, kind](Tape<double>& t, std::span<const Var<double>> v) {
                AttentionRef<double> p;
                p.kind = kind;
                p.mlp1 = {v[1], v[2], 1, 0};
                p.mlp2 = {v[3], v[4], 1, 0};
                p.spatial = {v[5], v[6], 1, 3};
                return project(t, attention_apply(v[0], p), s);
              },
              inputs, FdOptions{.max_components = 60, .pick_seed = s}));
    }
    return worst;
  });

  entry("resblock", 1e-4, [](std::uint64_t s) {
    Rng rng(s);
    std::vector<Tensor<double>> inputs = {
        draw(rng, {1, 8, 5, 6}),          draw(rng, {8, 8, 3, 3}, -0.3, 0.3),
        draw(rng, {8}, -0.2, 0.2),        draw(rng, {8, 8, 3, 3}, -0.3, 0.3),
        draw(rng, {8}, -0.2, 0.2),        draw(rng, {2, 8, 1, 1}, -0.5, 0.5),
        draw(rng, {2}),                   draw(rng, {8, 2, 1, 1}, -0.5, 0.5),
        draw(rng, {8})};
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          AttentionRef<double> att;
          att.kind = AttentionKind::frequency;
          att.mlp1 = {v[5], v[6], 1, 0};
          att.mlp2 = {v[7], v[8], 1, 0};
          return project(t, resblock(v[0], ConvRef<double>{v[1], v[2], 1, 1},
                                     ConvRef<double>{v[3], v[4], 1, 1}, att),
                         s);
        },
        inputs, FdOptions{.max_components = 60, .pick_seed = s});
  });

  entry("convlstm_cell", 1e-4, [](std::uint64_t s) {
    Rng rng(s);
    std::vector<Tensor<double>> inputs = {
        draw(rng, {1, 4, 5, 5}),  draw(rng, {1, 4, 5, 5}), draw(rng, {1, 4, 5, 5}),
        draw(rng, {16, 4, 3, 3}, -0.3, 0.3), draw(rng, {16}, -0.2, 0.2),
        draw(rng, {16, 4, 3, 3}, -0.3, 0.3)};
    return finite_diff_check(
        [s](Tape<double>& t, std::span<const Var<double>> v) {
          CellRef<double> cell{{v[3], v[4], 1, 1}, {v[5], Var<double>{}, 1, 1}};
          auto [h2, c2] = convlstm_cell(v[0], v[1], v[2], cell);
          return add(project(t, h2, s), project(t, c2, s + 1));
        },
        inputs, FdOptions{.max_components = 80, .pick_seed = s});
  });

  // Stage-level checks assemble a minimal parameter map by hand. The offset
  // convs get tiny weights and a 0.37 bias so every sampling position keeps
  // a guaranteed margin from the bilinear kinks at integers.
  const int sc = 4;  // stage channels
  auto stage_model = [sc](Tape<double>& t, const ModelConfig& cfg,
                          const std::vector<std::string>& paths,
                          std::span<const Var<double>> v, std::size_t first) {
    BoundModel<double> m;
    m.tape = &t;
    m.cfg = cfg;
    for (std::size_t i = 0; i < paths.size(); ++i) m.params.emplace(paths[i], v[first + i]);
    return m;
  };

  entry("flti_interpolate", 1e-4, [&, sc](std::uint64_t s) {
    Rng rng(s);
    std::vector<Tensor<double>> inputs = {draw(rng, {1, sc, 5, 5}), draw(rng, {1, sc, 5, 5})};
    const std::vector<std::string> paths = {
        "flti.g1.weight",     "flti.g1.bias",   "flti.g3.weight",    "flti.g3.bias",
        "flti.dconv1.weight", "flti.dconv1.bias", "flti.dconv2.weight", "flti.dconv2.bias",
        "flti.alpha.weight",  "flti.alpha.bias", "flti.beta.weight",  "flti.beta.bias"};
    inputs.push_back(draw(rng, {18, 2 * sc, 3, 3}, -0.002, 0.002));
    inputs.push_back(Tensor<double>::full({18}, 0.37));
    inputs.push_back(draw(rng, {18, 2 * sc, 3, 3}, -0.002, 0.002));
    inputs.push_back(Tensor<double>::full({18}, 0.37));
    for (int k = 0; k < 2; ++k) {
      inputs.push_back(draw(rng, {sc, sc, 3, 3}, -0.3, 0.3));
      inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    }
    for (int k = 0; k < 2; ++k) {
      inputs.push_back(draw(rng, {sc, sc, 1, 1}, -0.5, 0.5));
      inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    }
    ModelConfig cfg;
    cfg.channels = sc;
    cfg.attention_kind = AttentionKind::none;
    return finite_diff_check(
        [&, s](Tape<double>& t, std::span<const Var<double>> v) {
          BoundModel<double> m = stage_model(t, cfg, paths, v, 2);
          return project(t, flti_interpolate(m, v[0], v[1]), s);
        },
        inputs, FdOptions{.max_components = 40, .pick_seed = s});
  });

  entry("tfe_enhance", 1e-4, [&, sc](std::uint64_t s) {
    Rng rng(s);
    std::vector<Tensor<double>> inputs = {draw(rng, {1, sc, 5, 5}), draw(rng, {1, sc, 5, 5}),
                                          draw(rng, {1, sc, 5, 5})};
    const std::vector<std::string> paths = {
        "tfe.motion_f.weight", "tfe.motion_f.bias", "tfe.motion_b.weight", "tfe.motion_b.bias",
        "tfe.refine1.weight",  "tfe.refine1.bias",  "tfe.refine2.weight",  "tfe.refine2.bias",
        "tfe.refine3.weight",  "tfe.refine3.bias",  "tfe.refine4.weight",  "tfe.refine4.bias"};
    inputs.push_back(draw(rng, {sc, 2 * sc, 3, 3}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {sc, 2 * sc, 3, 3}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {2 * sc, 5 * sc, 1, 1}, -0.3, 0.3));
    inputs.push_back(draw(rng, {2 * sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {sc, 2 * sc, 1, 1}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {sc, sc, 1, 1}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {sc, sc, 1, 1}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    ModelConfig cfg;
    cfg.channels = sc;
    cfg.attention_kind = AttentionKind::none;
    return finite_diff_check(
        [&, s](Tape<double>& t, std::span<const Var<double>> v) {
          BoundModel<double> m = stage_model(t, cfg, paths, v, 3);
          return project(t, tfe_enhance(m, v[0], v[1], v[2]), s);
        },
        inputs, FdOptions{.max_components = 40, .pick_seed = s});
  });

  entry("gstir_refine", 1e-4, [&, sc](std::uint64_t s) {
    Rng rng(s);
    std::vector<Tensor<double>> inputs = {draw(rng, {1, sc, 5, 5}), draw(rng, {1, sc, 5, 5}),
                                          draw(rng, {1, sc, 5, 5})};  // f0, f1, G
    const std::vector<std::string> paths = {
        "gstir.main_cell.input.weight", "gstir.main_cell.input.bias",
        "gstir.main_cell.hidden.weight", "gstir.conv_in.weight", "gstir.conv_in.bias",
        "gstir.conv_res.weight", "gstir.conv_res.bias"};
    inputs.push_back(draw(rng, {4 * sc, sc, 3, 3}, -0.3, 0.3));
    inputs.push_back(draw(rng, {4 * sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {4 * sc, sc, 3, 3}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc, sc, 3, 3}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    inputs.push_back(draw(rng, {sc, sc, 3, 3}, -0.3, 0.3));
    inputs.push_back(draw(rng, {sc}, -0.2, 0.2));
    ModelConfig cfg;
    cfg.channels = sc;
    cfg.attention_kind = AttentionKind::none;
    return finite_diff_check(
        [&, s](Tape<double>& t, std::span<const Var<double>> v) {
          BoundModel<double> m = stage_model(t, cfg, paths, v, 3);
          const Var<double> feats[2] = {v[0], v[1]};
          std::vector<Var<double>> hs = gstir_refine<double>(m, feats, v[2]);
          return add(project(t, hs[0], s), project(t, hs[1], s + 1));
        },
        inputs, FdOptions{.max_components = 40, .pick_seed = s});
  });

  // Targets sit far from the predictions: near d = 0 the Charbonnier third
  // derivative grows like 1/eps^2 and dominates the central-difference
  // truncation error without exercising any different code.
  entry("charbonnier_loss", 1e-6, [](std::uint64_t s) {
    Rng rng(s);
    std::vector<Tensor<double>> inputs = {draw(rng, {2, 3, 4, 4}), draw(rng, {2, 3, 4, 4})};
    Tensor<double> tgt0 = draw(rng, {2, 3, 4, 4}, 2.0, 3.0);
    Tensor<double> tgt1 = draw(rng, {2, 3, 4, 4}, 2.0, 3.0);
    return finite_diff_check(
        [tgt0, tgt1](Tape<double>& t, std::span<const Var<double>> v) {
          const Var<double> preds[2] = {v[0], v[1]};
          const Tensor<double> tgts[2] = {tgt0, tgt1};
          return charbonnier_loss<double>(preds, tgts);
        },
        inputs);
  });

  entry("full_model", 1e-3, [](std::uint64_t s) {
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.n_res_extract = 1;
    cfg.n_res_recon = 1;
    cfg.scale = 2;
    std::vector<std::string> paths;
    for (const ParamSpec& spec : girnet_param_specs(cfg)) paths.push_back(spec.path);
    std::vector<Tensor<double>> inputs;
    Tensor<double> tgts[3];
    auto build = [&](Tape<double>& t, std::span<const Var<double>> v) {
      BoundModel<double> m;
      m.tape = &t;
      m.cfg = cfg;
      for (std::size_t i = 0; i < paths.size(); ++i) m.params.emplace(paths[i], v[2 + i]);
      const Var<double> frames[2] = {v[0], v[1]};
      std::vector<Var<double>> out = girnet_forward<double>(m, frames);
      return charbonnier_loss<double>(out, tgts);
    };
    // A base point within h of a relu corner or a bilinear cell boundary
    // makes the central difference straddle two derivative branches; keep
    // the draw whose forward pass stays farthest from any of them.
    std::vector<Tensor<double>> best_inputs;
    Tensor<double> best_tgts[3];
    double best_margin = -1.0;
    for (std::uint64_t attempt = 0; attempt < 30; ++attempt) {
      Rng rng(mix_seed({s, attempt}));
      inputs.clear();
      inputs.push_back(draw(rng, {1, 3, 8, 8}, 0.0, 1.0));
      inputs.push_back(draw(rng, {1, 3, 8, 8}, 0.0, 1.0));
      for (const ParamSpec& spec : girnet_param_specs(cfg)) {
        if (spec.path.rfind("flti.g", 0) == 0) {
          // offsets held small and off-integer
          if (spec.shape.size() == 1)
            inputs.push_back(Tensor<double>::full(spec.shape, 0.37));
          else
            inputs.push_back(draw(rng, spec.shape, -0.001, 0.001));
        } else if (spec.shape.size() == 1) {
          inputs.push_back(draw(rng, spec.shape, -0.1, 0.1));
        } else {
          const int fan = spec.shape[1] * spec.shape[2] * spec.shape[3];
          const double b = std::sqrt(1.5 / fan);
          inputs.push_back(draw(rng, spec.shape, -b, b));
        }
      }
      for (Tensor<double>& t : tgts) t = draw(rng, {1, 3, 16, 16}, 2.0, 3.0);
      KinkScope scope;
      Tape<double> tape;
      std::vector<Var<double>> vars;
      for (const Tensor<double>& x : inputs) vars.push_back(tape.leaf(x, false));
      build(tape, vars);
      if (scope.min_dist > best_margin) {
        best_margin = scope.min_dist;
        best_inputs = inputs;
        for (int i = 0; i < 3; ++i) best_tgts[i] = tgts[i];
      }
      if (best_margin > 8e-5) break;
    }
    inputs = std::move(best_inputs);
    for (int i = 0; i < 3; ++i) tgts[i] = best_tgts[i];
    return finite_diff_check(
        build, inputs,
        FdOptions{.max_components = 4, .pick_seed = s, .min_grad_mag = 1e-6});
  });

  return results;
}

}  // namespace girnet
