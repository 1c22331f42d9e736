#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fibrelens/checkpoint.hpp"
#include "fibrelens/dataset.hpp"
#include "fibrelens/inversion.hpp"
#include "fibrelens/metrics.hpp"

namespace fibrelens {

// Per-epoch training record. `lr` is the rate used during the epoch.
struct LossReport {
  std::size_t epoch = 0;   // 1-based
  double train_loss = 0.0; // mean mini-batch zeta over the epoch
  double val_loss = 0.0;   // validation zeta at the end of the epoch
  double val_mse = 0.0;    // validation data term only
  double lr = 0.0;

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

struct ResumeState {
  InverseModel model;
  CheckpointMeta meta;
  std::vector<LossReport> history;
};

struct TrainOptions {
  // When set, every epoch writes epoch_NNNN.mmfw and appends to history.csv here.
  std::filesystem::path checkpoint_dir;
  const ResumeState* resume = nullptr;
  std::function<void(const LossReport&)> on_epoch;
};

struct TrainResult {
  InverseModel model;
  std::vector<LossReport> history;
  bool stopped_early = false;
};

TrainResult train(const PairSet& pairs, const TrainConfig& cfg, const TrainOptions& options = {});
TrainResult train(const PairSet& pairs, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint_dir);

// Latest checkpoint in `checkpoint_dir` together with the history up to it.
ResumeState load_resume_state(const std::filesystem::path& checkpoint_dir);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch);

void write_history(const std::filesystem::path& path, std::span<const LossReport> history);
std::vector<LossReport> read_history(const std::filesystem::path& path);

// forward(x)^2 on the out_dim x out_dim grid, divided by its maximum when
// that exceeds one, clamped to [0, 1].
ImagePlane reconstruct(const InverseModel& model, const SpeckleRecord& speckle);
ImagePlane reconstruct(const InverseModel& model, std::span<const float> amplitudes);

RgbImage reconstruct_rgb(const InverseModel& model, const SpeckleRecord& red,
                         const SpeckleRecord& green, const SpeckleRecord& blue);

struct EvalReport {
  std::vector<double> ssim;
  std::vector<std::optional<double>> pcc;  // empty where undefined
  std::vector<double> mse;
  double mean_ssim = 0.0;
  double mean_pcc = 0.0;  // over defined values only
  double mean_mse = 0.0;
  std::size_t undefined_pcc = 0;
  std::map<std::string, std::string> metadata;
};

EvalReport evaluate(const InverseModel& model, const PairSet& pairs, const MetricParams& params = {});

// CSV with header index,ssim,pcc,mse, one row per image and a trailing
// "# mean ..." aggregate line.
std::string format_eval_csv(const EvalReport& report);
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

struct DecorrelationPoint {
  std::size_t index = 0;
  double ssim = 0.0;
};

// SSIM of every frame against the first.
std::vector<DecorrelationPoint> decorrelation_series(std::span<const ImagePlane> frames,
                                                     const MetricParams& params = {});

// Pixel-wise mean of the images of records [begin, end).
ImagePlane mean_image(const PairSet& pairs, std::size_t begin, std::size_t end);

}  // namespace fibrelens
