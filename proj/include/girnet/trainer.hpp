#pragma once

// Training loop: per-epoch clip permutation, deterministic patch sampling,
// one batched graph per optimizer step, Adam with the stepped schedule, a
// checkpoint per epoch, and a NaN abort that leaves the last-good checkpoint
// in place. Also the inference and ablation-grid drivers built on top of it.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "girnet/adam.hpp"
#include "girnet/checkpoint.hpp"
#include "girnet/data.hpp"
#include "girnet/errors.hpp"
#include "girnet/metrics.hpp"
#include "girnet/model.hpp"

namespace girnet {

// Stacks same-shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: empty list");
  for (const Tensor<T>& t : items) check_same_shape(t, items[0], "stack_batch");
  Shape shape;
  shape.push_back(static_cast<int>(items.size()));
  for (int d : items[0].shape()) shape.push_back(d);
  Tensor<T> out(shape);
  const std::size_t stride = items[0].numel();
  for (std::size_t i = 0; i < items.size(); ++i)
    std::copy(items[i].data(), items[i].data() + stride, out.data() + i * stride);
  return out;
}

struct TrainOptions {
  ModelConfig config;
  int epochs = 1;
  int batch = 8;
  std::uint64_t seed = 0;
  double base_lr = 1e-4;
  std::string out_dir;          // receives latest.ckpt each epoch; empty = no checkpoints
  std::string resume;           // checkpoint to continue from; empty = fresh init
  std::ostream* log = nullptr;  // one "epoch\tstep\tloss\tlr" line per step
};

template <typename T>
struct TrainResult {
  std::vector<double> losses;  // per optimizer step of this run
  std::int64_t steps = 0;      // completed steps including any resumed prefix
  int epochs_done = 0;
  GirnetWeights<T> weights;
  OptimState<T> optim;
  std::string checkpoint_path;
};

namespace detail {

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

}  // namespace detail

// Trains on in-memory HR clips. Each epoch visits every clip once in a
// seeded random order, drawing one fresh patch per clip; patches are keyed
// by (seed, epoch, step, slot) so a resumed run replays the identical
// sample stream.
template <typename T>
TrainResult<T> train(const std::vector<VideoClip<T>>& hr_clips, const TrainOptions& opt) {
  if (hr_clips.empty()) throw DataError("train: no clips to train on");
  opt.config.validate();
  if (opt.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (opt.batch < 1) throw std::invalid_argument("train: batch must be >= 1");

  TrainResult<T> res;
  std::uint64_t seed = opt.seed;
  int start_epoch = 0;
  std::int64_t step = 0;
  AdamConfig acfg;
  acfg.lr = opt.base_lr;

  if (!opt.resume.empty()) {
    Checkpoint<T> ck = load_checkpoint<T>(opt.resume, &opt.config);
    res.weights.tensors = std::move(ck.params);
    res.optim.cfg = ck.adam;
    res.optim.t = ck.adam_t;
    res.optim.m = std::move(ck.m);
    res.optim.v = std::move(ck.v);
    seed = ck.seed;
    start_epoch = static_cast<int>(ck.epoch);
    step = ck.step;
  } else {
    res.weights = GirnetWeights<T>::init(opt.config, seed);
    res.optim = OptimState<T>::init(res.weights.tensors, acfg);
  }

  const int n_clips = static_cast<int>(hr_clips.size());
  for (int epoch = start_epoch; epoch < opt.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, opt.base_lr);
    std::vector<int> order(n_clips);
    std::iota(order.begin(), order.end(), 0);
    Rng perm_rng(mix_seed({seed, static_cast<std::uint64_t>(epoch)}));
    detail::shuffle_in_place(order, perm_rng);

    const int steps_this_epoch = (n_clips + opt.batch - 1) / opt.batch;
    for (int s = 0; s < steps_this_epoch; ++s) {
      std::vector<PatchSample<T>> samples;
      for (int slot = 0; slot < opt.batch && s * opt.batch + slot < n_clips; ++slot) {
        const int ci = order[s * opt.batch + slot];
        samples.push_back(random_patch(hr_clips[ci], opt.config.scale,
                                       mix_seed({seed, static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(s),
                                                 static_cast<std::uint64_t>(slot)})));
      }

      const std::size_t n_lr = samples[0].lr.frames.size();
      const std::size_t n_hr = samples[0].hr.frames.size();
      Tape<T> tape;
      BoundModel<T> m = bind_model(tape, res.weights, opt.config, /*requires_grad=*/true);
      std::vector<Var<T>> frames;
      std::vector<Tensor<T>> plane;
      for (std::size_t t = 0; t < n_lr; ++t) {
        plane.clear();
        for (const PatchSample<T>& p : samples) plane.push_back(p.lr.frames[t]);
        frames.push_back(tape.constant(stack_batch<T>(plane)));
      }
      std::vector<Tensor<T>> targets;
      for (std::size_t t = 0; t < n_hr; ++t) {
        plane.clear();
        for (const PatchSample<T>& p : samples) plane.push_back(p.hr.frames[t]);
        targets.push_back(stack_batch<T>(plane));
      }

      std::vector<Var<T>> out = girnet_forward<T>(m, frames);
      Var<T> loss = charbonnier_loss<T>(out, targets);
      const double lv = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(lv))
        throw NumericalError("train: non-finite loss at step " + std::to_string(step + 1));
      std::map<std::string, Tensor<T>> grads = reverse_accumulate(loss, m.params);
      adam_step(res.weights.tensors, grads, res.optim, lr);
      ++step;
      res.losses.push_back(lv);
      if (opt.log) *opt.log << epoch << '\t' << step << '\t' << lv << '\t' << lr << '\n';
    }

    if (!opt.out_dir.empty()) {
      std::filesystem::create_directories(opt.out_dir);
      Checkpoint<T> ck;
      ck.config = opt.config;
      ck.epoch = epoch + 1;
      ck.step = step;
      ck.seed = seed;
      ck.adam = res.optim.cfg;
      ck.adam_t = res.optim.t;
      ck.params = res.weights.tensors;
      ck.m = res.optim.m;
      ck.v = res.optim.v;
      const std::filesystem::path p = std::filesystem::path(opt.out_dir) / "latest.ckpt";
      save_checkpoint(p, ck);
      res.checkpoint_path = p.string();
    }
    res.epochs_done = epoch + 1;
  }
  res.steps = step;
  return res;
}

// Runs the network over a whole LR clip: n frames in, 2n-1 frames out,
// clamped to [0,1].
template <typename T>
VideoClip<T> infer_clip(const GirnetWeights<T>& w, const ModelConfig& cfg,
                        const VideoClip<T>& lr) {
  if (lr.frames.size() < 2)
    throw DataError("infer: need >= 2 input frames, got " + std::to_string(lr.frames.size()));
  std::vector<Tensor<T>> batched;
  for (const Tensor<T>& f : lr.frames) {
    Tensor<T> b({1, f.dim(0), f.dim(1), f.dim(2)});
    std::copy(f.data(), f.data() + f.numel(), b.data());
    batched.push_back(std::move(b));
  }
  std::vector<Tensor<T>> out = girnet_infer<T>(w, cfg, batched);
  VideoClip<T> hr;
  for (Tensor<T>& o : out) {
    Tensor<T> f({o.dim(1), o.dim(2), o.dim(3)});
    std::copy(o.data(), o.data() + f.numel(), f.data());
    clamp_unit(f);
    hr.frames.push_back(std::move(f));
  }
  return hr;
}

// Mean PSNR/SSIM of the network over a set of HR clips, each degraded and
// re-inferred. Used by ablate and the smoke tests.
template <typename T>
MetricReport evaluate_weights(const GirnetWeights<T>& w, const ModelConfig& cfg,
                              const std::vector<VideoClip<T>>& hr_clips) {
  MetricReport all;
  for (const VideoClip<T>& hr : hr_clips) {
    const VideoClip<T> lr = degrade_clip(hr, cfg.scale);
    const VideoClip<T> pred = infer_clip(w, cfg, lr);
    const MetricReport r = evaluate_clip(pred, hr);
    all.psnr_db.insert(all.psnr_db.end(), r.psnr_db.begin(), r.psnr_db.end());
    all.ssim_val.insert(all.ssim_val.end(), r.ssim_val.begin(), r.ssim_val.end());
  }
  for (double p : all.psnr_db) all.mean_psnr += p;
  for (double s : all.ssim_val) all.mean_ssim += s;
  if (!all.psnr_db.empty()) {
    all.mean_psnr /= static_cast<double>(all.psnr_db.size());
    all.mean_ssim /= static_cast<double>(all.ssim_val.size());
  }
  return all;
}

struct AblateRow {
  std::string name;
  double final_loss = 0;
  double psnr_db = 0;
  double ssim_val = 0;
};

// Trains the full config plus each single-toggle-off variant on the same
// clips and seed, then scores each on the training set.
template <typename T>
std::vector<AblateRow> ablate_grid(const std::vector<VideoClip<T>>& hr_clips,
                                   const ModelConfig& base, int epochs, int batch,
                                   std::uint64_t seed, std::ostream* log = nullptr) {
  struct Variant {
    std::string name;
    ModelConfig cfg;
  };
  std::vector<Variant> variants;
  variants.push_back({"full", base});
  {
    ModelConfig c = base;
    c.use_deformable = false;
    variants.push_back({"w/o deformable alignment", c});
  }
  {
    ModelConfig c = base;
    c.gstir_use_global_info = false;
    variants.push_back({"w/o global hidden state", c});
  }
  {
    ModelConfig c = base;
    c.gstir_use_residual = false;
    variants.push_back({"w/o local residual", c});
  }
  {
    ModelConfig c = base;
    c.use_global_residual = false;
    variants.push_back({"w/o reconstruction skip", c});
  }

  std::vector<AblateRow> rows;
  for (const Variant& v : variants) {
    TrainOptions opt;
    opt.config = v.cfg;
    opt.epochs = epochs;
    opt.batch = batch;
    opt.seed = seed;
    opt.log = log;
    TrainResult<T> r = train(hr_clips, opt);
    AblateRow row;
    row.name = v.name;
    row.final_loss = r.losses.empty() ? 0.0 : r.losses.back();
    const MetricReport m = evaluate_weights(r.weights, v.cfg, hr_clips);
    row.psnr_db = m.mean_psnr;
    row.ssim_val = m.mean_ssim;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ablate_markdown(const std::vector<AblateRow>& rows) {
  std::string out;
  out += "| Model | Loss | PSNR (dB) | SSIM |\n";
  out += "| --- | --- | --- | --- |\n";
  char buf[160];
  for (const AblateRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "| %s | %.6f | %.3f | %.4f |\n", r.name.c_str(),
                  r.final_loss, r.psnr_db, r.ssim_val);
    out += buf;
  }
  return out;
}

}  // namespace girnet
