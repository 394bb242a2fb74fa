// End-to-end walkthrough on one synthetic clip: build it, degrade it, train
// a small model on it for a handful of steps, and compare against the
// training-free baseline (bicubic upscale + nearest-frame repeat). Frames
// land in a scratch directory as PPM files.

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <girnet/girnet.hpp>

using namespace girnet;

namespace {

// A coarse drifting gradient plus a fine grating near the downsampled grid's
// resolving limit: the fine detail is exactly what bicubic upscaling cannot
// recover, so there is something real for the network to learn.
VideoClip<float> moving_pattern(int frames, int side, int variant) {
  VideoClip<float> clip;
  const double tau = 6.283185307179586;
  const double vx = 2.0 + 0.4 * variant, vy = 3.4 - 0.3 * variant;
  const double ph = 0.8 * variant;
  for (int t = 0; t < frames; ++t) {
    Tensor<float> img({3, side, side});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double xs = x + vx * t, ys = y + vy * t;
          const double coarse = 0.09 * std::sin(tau * (2 * ys + 1 * xs) / side + 0.6 * c + ph);
          const double fine = 0.33 * std::sin(tau * (12 * ys + 11 * xs) / side + 0.6 * c + ph);
          img.at(c, y, x) = (float)(0.5 + coarse + fine);
        }
    clip.frames.push_back(std::move(img));
  }
  return clip;
}

}  // namespace

int main() {
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.n_res_extract = 1;
  cfg.n_res_recon = 1;
  cfg.attention_kind = AttentionKind::none;
  cfg.scale = 2;

  std::vector<VideoClip<float>> clips;
  for (int v = 0; v < 4; ++v) clips.push_back(moving_pattern(7, 64, v));
  const VideoClip<float>& hr = clips[0];
  const VideoClip<float> lr = degrade_clip(hr, cfg.scale);
  std::printf("4 clips: %zu HR frames -> %zu LR frames of %dx%d each\n", hr.frames.size(),
              lr.frames.size(), lr.frames[0].dim(2), lr.frames[0].dim(1));

  TrainOptions opt;
  opt.config = cfg;
  opt.epochs = 300;  // 4 clips at batch 4: one optimizer step per epoch
  opt.batch = 4;
  opt.seed = 1;
  opt.base_lr = 5e-4;
  std::printf("training %d steps...\n", opt.epochs);
  const TrainResult<float> res = train<float>(clips, opt);
  std::printf("loss %.4f -> %.4f\n", res.losses.front(), res.losses.back());

  const VideoClip<float> pred = infer_clip(res.weights, cfg, lr);
  const VideoClip<float> base = baseline_upsample(lr, cfg.scale);
  const MetricReport mp = evaluate_clip(pred, hr);
  const MetricReport mb = evaluate_clip(base, hr);
  std::printf("network   %.2f dB / %.4f ssim\n", mp.mean_psnr, mp.mean_ssim);
  std::printf("baseline  %.2f dB / %.4f ssim\n", mb.mean_psnr, mb.mean_ssim);

  const auto out = std::filesystem::temp_directory_path() / "girnet_demo";
  save_clip(pred, (out / "pred").string());
  save_clip(base, (out / "baseline").string());
  save_clip(hr, (out / "ground_truth").string());
  std::printf("frames written under %s\n", out.string().c_str());
  return 0;
}
