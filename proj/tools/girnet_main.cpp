// Command-line front end: train / infer / eval / degrade / gradcheck / ablate.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <girnet/girnet.hpp>

extern "C" void openblas_set_num_threads(int);

namespace {

std::vector<girnet::VideoClip<float>> load_clips_from_manifest(const std::string& manifest) {
  std::vector<girnet::VideoClip<float>> clips;
  for (const std::string& dir : girnet::load_manifest(manifest))
    clips.push_back(girnet::load_clip<float>(dir));
  return clips;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("GIRNET_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) openblas_set_num_threads(n);
  }

  CLI::App app{"girnet: joint video frame interpolation and super-resolution"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest of clip directories");
  std::string tr_manifest, tr_config, tr_out, tr_resume;
  int tr_epochs = 1, tr_batch = 8;
  std::uint64_t tr_seed = 0;
  double tr_lr = 1e-4;
  train_cmd->add_option("--manifest", tr_manifest, "Text file with one clip directory per line")
      ->required();
  train_cmd->add_option("--config", tr_config, "Model config JSON (defaults when omitted)");
  train_cmd->add_option("--epochs", tr_epochs, "Epochs to train")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch", tr_batch, "Patches per optimizer step")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr_seed, "Seed for init, shuffling and patch sampling");
  train_cmd->add_option("--lr", tr_lr, "Base learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", tr_out, "Directory for latest.ckpt")->required();
  train_cmd->add_option("--resume", tr_resume, "Checkpoint to continue from");
  train_cmd->callback([&] {
    girnet::TrainOptions opt;
    opt.config = tr_config.empty() ? girnet::ModelConfig{} : girnet::load_config(tr_config);
    opt.epochs = tr_epochs;
    opt.batch = tr_batch;
    opt.seed = tr_seed;
    opt.base_lr = tr_lr;
    opt.out_dir = tr_out;
    opt.resume = tr_resume;
    opt.log = &std::cout;
    const auto clips = load_clips_from_manifest(tr_manifest);
    const auto res = girnet::train(clips, opt);
    std::cout << "trained " << res.epochs_done << " epoch(s), " << res.steps << " step(s)";
    if (!res.checkpoint_path.empty()) std::cout << ", checkpoint at " << res.checkpoint_path;
    std::cout << "\n";
  });

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Run a checkpoint over an LR clip directory");
  std::string in_ckpt, in_dir, in_out;
  int in_scale = 0;
  infer_cmd->add_option("--ckpt", in_ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--in", in_dir, "LR clip directory")->required();
  infer_cmd->add_option("--out", in_out, "Output directory for HR frames")->required();
  infer_cmd->add_option("--scale", in_scale, "Expected scale; rejected if it mismatches the checkpoint");
  infer_cmd->callback([&] {
    const auto ck = girnet::load_checkpoint<float>(in_ckpt);
    if (in_scale > 0 && in_scale != ck.config.scale)
      throw girnet::DataError("infer: requested scale " + std::to_string(in_scale) +
                              " but checkpoint was trained at scale " +
                              std::to_string(ck.config.scale));
    girnet::GirnetWeights<float> w;
    w.tensors = ck.params;
    const auto lr = girnet::load_clip<float>(in_dir);
    const auto hr = girnet::infer_clip(w, ck.config, lr);
    girnet::save_clip(hr, in_out);
    std::cout << "wrote " << hr.frames.size() << " frames to " << in_out << "\n";
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of a predicted clip against ground truth");
  std::string ev_pred, ev_gt;
  bool ev_luma = false;
  eval_cmd->add_option("--pred", ev_pred, "Predicted clip directory")->required();
  eval_cmd->add_option("--gt", ev_gt, "Ground-truth clip directory")->required();
  eval_cmd->add_flag("--luma-only", ev_luma, "Evaluate on the luma channel only");
  eval_cmd->callback([&] {
    const auto pred = girnet::load_clip<float>(ev_pred);
    const auto gt = girnet::load_clip<float>(ev_gt);
    if (pred.frames.size() != gt.frames.size())
      throw girnet::DataError("eval: " + std::to_string(pred.frames.size()) +
                              " predicted frames vs " + std::to_string(gt.frames.size()) +
                              " ground-truth frames");
    const auto r = girnet::evaluate_clip(pred, gt, ev_luma);
    std::filesystem::path idp(ev_pred);
    if (idp.filename().empty()) idp = idp.parent_path();
    const std::string clip_id = idp.filename().empty() ? ev_pred : idp.filename().string();
    std::printf("clip\tframe\tpsnr_db\tssim\n");
    for (std::size_t i = 0; i < r.psnr_db.size(); ++i)
      std::printf("%s\t%zu\t%.4f\t%.6f\n", clip_id.c_str(), i, r.psnr_db[i], r.ssim_val[i]);
    std::printf("%s\tmean\t%.4f\t%.6f\n", clip_id.c_str(), r.mean_psnr, r.mean_ssim);
  });

  // degrade
  auto* deg_cmd = app.add_subcommand("degrade", "Build the LR input clip from an HR clip");
  std::string dg_in, dg_out;
  int dg_scale = 4;
  deg_cmd->add_option("--in", dg_in, "HR clip directory")->required();
  deg_cmd->add_option("--out", dg_out, "Output LR clip directory")->required();
  deg_cmd->add_option("--scale", dg_scale, "Spatial downscale factor")
      ->required()
      ->check(CLI::IsMember({2, 4, 8}));
  deg_cmd->callback([&] {
    const auto hr = girnet::load_clip<float>(dg_in);
    const auto lr = girnet::degrade_clip(hr, dg_scale);
    girnet::save_clip(lr, dg_out);
    std::cout << "wrote " << lr.frames.size() << " frames to " << dg_out << "\n";
  });

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every op's gradients");
  std::string gc_op;
  int gc_seeds = 5;
  gc_cmd->add_option("--op", gc_op, "Check only ops whose name contains this substring");
  gc_cmd->add_option("--seeds", gc_seeds, "Random seeds per op")->check(CLI::PositiveNumber);
  gc_cmd->callback([&] {
    const auto entries = girnet::gradcheck_suite(gc_op, gc_seeds);
    if (entries.empty())
      throw CLI::ValidationError("--op", "no op matches '" + gc_op + "'");
    int failed = 0;
    for (const auto& e : entries) {
      std::printf("%-20s max_rel_err %.3e  tol %.0e  seeds %d  [%s]\n", e.name.c_str(),
                  e.max_rel_err, e.tolerance, e.seeds, e.pass ? "ok" : "FAIL");
      if (!e.pass) ++failed;
    }
    if (failed)
      throw girnet::NumericalError("gradcheck: " + std::to_string(failed) + " op(s) failed");
  });

  // ablate
  auto* ab_cmd = app.add_subcommand("ablate", "Train the toggle grid and emit a Markdown table");
  std::string ab_manifest, ab_config, ab_out;
  int ab_epochs = 2, ab_batch = 8;
  std::uint64_t ab_seed = 0;
  ab_cmd->add_option("--manifest", ab_manifest, "Text file with one clip directory per line")
      ->required();
  ab_cmd->add_option("--config", ab_config, "Base config JSON (default: small smoke config)");
  ab_cmd->add_option("--out", ab_out, "Directory for ablation.md")->required();
  ab_cmd->add_option("--epochs", ab_epochs, "Epochs per variant")->check(CLI::PositiveNumber);
  ab_cmd->add_option("--batch", ab_batch, "Patches per optimizer step")
      ->check(CLI::PositiveNumber);
  ab_cmd->add_option("--seed", ab_seed, "Seed shared by every variant");
  ab_cmd->callback([&] {
    girnet::ModelConfig base;
    if (ab_config.empty()) {
      base.channels = 16;
      base.n_res_extract = 2;
      base.n_res_recon = 2;
      base.scale = 2;
    } else {
      base = girnet::load_config(ab_config);
    }
    const auto clips = load_clips_from_manifest(ab_manifest);
    const auto rows = girnet::ablate_grid(clips, base, ab_epochs, ab_batch, ab_seed);
    const std::string table = girnet::ablate_markdown(rows);
    std::filesystem::create_directories(ab_out);
    const auto path = std::filesystem::path(ab_out) / "ablation.md";
    std::ofstream os(path);
    if (!os) throw girnet::DataError("ablate: cannot write '" + path.string() + "'");
    os << table;
    std::cout << table;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const girnet::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const girnet::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
