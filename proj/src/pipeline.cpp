#include "fibrelens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fibrelens/error.hpp"
#include "fibrelens/random.hpp"
#include "fibrelens/schedule.hpp"
#include "fibrelens/spkl.hpp"

namespace fibrelens {

namespace fs = std::filesystem;

namespace {

constexpr const char* kHistoryFile = "history.csv";

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void prune_checkpoints(const fs::path& dir, std::size_t epoch, std::size_t keep) {
  if (keep == 0 || epoch <= keep) return;
  std::error_code ec;
  fs::remove(checkpoint_path(dir, epoch - keep), ec);
}

}  // namespace

fs::path checkpoint_path(const fs::path& dir, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04zu.mmfw", epoch);
  return dir / name;
}

void write_history(const fs::path& path, std::span<const LossReport> history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_mse,lr\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << fmt("%.17g", h.train_loss) << ',' << fmt("%.17g", h.val_loss) << ','
        << fmt("%.17g", h.val_mse) << ',' << fmt("%.17g", h.lr) << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << out.str();
  if (!file) throw IoError("failed writing " + path.string());
}

std::vector<LossReport> read_history(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("epoch,", 0) != 0) {
    throw FormatError(FormatError::Kind::corrupt_header, "bad history header in " + path.string());
  }
  std::vector<LossReport> history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw FormatError(FormatError::Kind::corrupt_header, "bad history row: " + line);
    }
    LossReport r;
    r.epoch = std::stoul(cells[0]);
    r.train_loss = std::strtod(cells[1].c_str(), nullptr);
    r.val_loss = std::strtod(cells[2].c_str(), nullptr);
    r.val_mse = std::strtod(cells[3].c_str(), nullptr);
    r.lr = std::strtod(cells[4].c_str(), nullptr);
    history.push_back(r);
  }
  return history;
}

ResumeState load_resume_state(const fs::path& checkpoint_dir) {
  std::size_t latest = 0;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(checkpoint_dir, ec)) {
    const std::string name = entry.path().filename().string();
    unsigned long epoch = 0;
    if (std::sscanf(name.c_str(), "epoch_%lu.mmfw", &epoch) == 1 &&
        checkpoint_path(checkpoint_dir, epoch) == entry.path()) {
      latest = std::max<std::size_t>(latest, epoch);
    }
  }
  if (ec) throw IoError("cannot list " + checkpoint_dir.string());
  if (latest == 0) throw IoError("no checkpoints in " + checkpoint_dir.string());

  Checkpoint ck = load_checkpoint(checkpoint_path(checkpoint_dir, latest));
  auto history = read_history(checkpoint_dir / kHistoryFile);
  std::erase_if(history, [&](const LossReport& r) { return r.epoch > ck.meta.epoch; });
  if (history.size() != ck.meta.epoch) {
    throw FormatError(FormatError::Kind::dimension_mismatch,
                      "history has " + std::to_string(history.size()) + " epochs, checkpoint is at " +
                          std::to_string(ck.meta.epoch));
  }
  return {std::move(ck.model), ck.meta, std::move(history)};
}

TrainResult train(const PairSet& pairs, const TrainConfig& cfg, const fs::path& checkpoint_dir) {
  TrainOptions options;
  options.checkpoint_dir = checkpoint_dir;
  return train(pairs, cfg, options);
}

TrainResult train(const PairSet& pairs, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const Split split = pairs.split();
  if (split.train == 0) throw ArgumentError("training split is empty");
  if (pairs.image_width() != pairs.image_height()) throw ArgumentError("images must be square");
  const std::size_t in_dim = square_side(pairs.speckle_length());
  const std::size_t out_dim = pairs.image_width();

  TrainResult result;
  if (options.resume != nullptr) {
    const ResumeState& resume = *options.resume;
    if (resume.model.out_dim() != out_dim || resume.model.in_dim() != in_dim) {
      throw ArgumentError("checkpoint dimensions do not match the pair set");
    }
    result.model = resume.model;
    result.history = resume.history;
  } else {
    result.model = init_model(out_dim, in_dim, cfg);
  }

  PlateauScheduler scheduler(cfg);
  EarlyStopping stopper(cfg);
  for (const auto& h : result.history) {
    scheduler.update(h.train_loss);
    result.stopped_early = stopper.update(h.train_loss);
  }
  if (options.resume != nullptr && static_cast<float>(scheduler.lr()) != options.resume->meta.lr) {
    throw ArgumentError("checkpoint learning rate disagrees with the replayed history");
  }
  if (result.stopped_early) return result;

  std::vector<std::vector<float>> targets(pairs.size());
  std::vector<Example> examples(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    targets[i] = intensity_to_amplitude(pairs[i].image);
    examples[i] = {pairs[i].speckle.amplitudes, targets[i]};
  }
  const std::span<const Example> validation(examples.data() + split.train, split.validation);

  if (!options.checkpoint_dir.empty()) fs::create_directories(options.checkpoint_dir);

  std::vector<Example> batch;
  batch.reserve(cfg.batch_size);
  for (std::size_t epoch = result.history.size(); epoch < cfg.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    const auto order = shuffled_indices(split.train, cfg.rng_seed, epoch + 1);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        if (order[k] >= split.train) throw std::logic_error("validation record scheduled for a gradient step");
        batch.push_back(examples[order[k]]);
      }
      const double zeta = train_step(result.model, batch, cfg.lambda, lr, cfg.loss_domain, cfg.threads);
      loss_sum += zeta * static_cast<double>(batch.size());
    }

    LossReport report;
    report.epoch = epoch + 1;
    report.lr = lr;
    report.train_loss = loss_sum / static_cast<double>(split.train);
    if (!std::isfinite(report.train_loss) || !result.model.weights().all_finite()) {
      throw NumericError("training diverged at epoch " + std::to_string(report.epoch) +
                         " (loss " + fmt("%g", report.train_loss) + ")");
    }
    if (validation.empty()) {
      report.val_mse = std::numeric_limits<double>::quiet_NaN();
      report.val_loss = report.val_mse;
    } else {
      report.val_mse = data_loss(result.model, validation, cfg.loss_domain, cfg.threads);
      report.val_loss = report.val_mse + cfg.lambda * result.model.weights().squared_norm();
    }

    const double next_lr = scheduler.update(report.train_loss);
    const bool stop = stopper.update(report.train_loss);
    result.history.push_back(report);

    if (!options.checkpoint_dir.empty()) {
      const CheckpointMeta meta{static_cast<std::uint32_t>(report.epoch), static_cast<float>(cfg.lambda),
                                static_cast<float>(next_lr), cfg.rng_seed};
      save_checkpoint(checkpoint_path(options.checkpoint_dir, report.epoch), result.model, meta);
      write_history(options.checkpoint_dir / kHistoryFile, result.history);
      prune_checkpoints(options.checkpoint_dir, report.epoch, cfg.keep_checkpoints);
    }
    if (options.on_epoch) options.on_epoch(report);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

ImagePlane reconstruct(const InverseModel& model, std::span<const float> amplitudes) {
  const auto a = forward(model, amplitudes);
  std::vector<double> intensity(a.size());
  std::transform(a.begin(), a.end(), intensity.begin(), [](double v) { return v * v; });
  const double peak = intensity.empty() ? 0.0 : *std::max_element(intensity.begin(), intensity.end());
  const double scale = peak > 1.0 ? 1.0 / peak : 1.0;
  std::vector<float> values(intensity.size());
  std::transform(intensity.begin(), intensity.end(), values.begin(), [&](double v) {
    return static_cast<float>(std::clamp(v * scale, 0.0, 1.0));
  });
  return ImagePlane(model.out_dim(), model.out_dim(), std::move(values));
}

ImagePlane reconstruct(const InverseModel& model, const SpeckleRecord& speckle) {
  return reconstruct(model, std::span<const float>(speckle.amplitudes));
}

RgbImage reconstruct_rgb(const InverseModel& model, const SpeckleRecord& red,
                         const SpeckleRecord& green, const SpeckleRecord& blue) {
  if (red.amplitudes.size() != green.amplitudes.size() ||
      red.amplitudes.size() != blue.amplitudes.size()) {
    throw ArgumentError("RGB speckle records differ in length");
  }
  return merge_rgb(reconstruct(model, red), reconstruct(model, green), reconstruct(model, blue));
}

EvalReport evaluate(const InverseModel& model, const PairSet& pairs, const MetricParams& params) {
  if (pairs.empty()) throw ArgumentError("cannot evaluate an empty pair set");
  params.validate();
  EvalReport report;
  double ssim_sum = 0.0;
  double pcc_sum = 0.0;
  double mse_sum = 0.0;
  std::size_t pcc_count = 0;
  for (const auto& pair : pairs.records()) {
    const ImagePlane recon = reconstruct(model, pair.speckle);
    report.ssim.push_back(ssim(recon, pair.image, params));
    report.mse.push_back(mse(recon, pair.image));
    try {
      const double r = pcc(recon, pair.image);
      report.pcc.emplace_back(r);
      pcc_sum += r;
      ++pcc_count;
    } catch (const UndefinedMetricError&) {
      report.pcc.emplace_back(std::nullopt);
      ++report.undefined_pcc;
    }
    ssim_sum += report.ssim.back();
    mse_sum += report.mse.back();
  }
  const auto n = static_cast<double>(pairs.size());
  report.mean_ssim = ssim_sum / n;
  report.mean_mse = mse_sum / n;
  report.mean_pcc = pcc_count > 0 ? pcc_sum / static_cast<double>(pcc_count)
                                  : std::numeric_limits<double>::quiet_NaN();
  report.metadata["records"] = std::to_string(pairs.size());
  report.metadata["out_dim"] = std::to_string(model.out_dim());
  report.metadata["in_dim"] = std::to_string(model.in_dim());
  report.metadata["k1"] = fmt("%g", params.k1);
  report.metadata["k2"] = fmt("%g", params.k2);
  report.metadata["dynamic_range"] = fmt("%g", params.dynamic_range);
  return report;
}

std::string format_eval_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "index,ssim,pcc,mse\n";
  for (std::size_t i = 0; i < report.ssim.size(); ++i) {
    out << i << ',' << fmt("%.9g", report.ssim[i]) << ','
        << (report.pcc[i] ? fmt("%.9g", *report.pcc[i]) : std::string("nan")) << ','
        << fmt("%.9g", report.mse[i]) << '\n';
  }
  out << "# mean ssim=" << fmt("%.9g", report.mean_ssim) << " pcc=" << fmt("%.9g", report.mean_pcc)
      << " mse=" << fmt("%.9g", report.mean_mse) << " n=" << report.ssim.size()
      << " undefined_pcc=" << report.undefined_pcc << '\n';
  return out.str();
}

void write_eval_csv(const fs::path& path, const EvalReport& report) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << format_eval_csv(report);
  if (!file) throw IoError("failed writing " + path.string());
}

std::vector<DecorrelationPoint> decorrelation_series(std::span<const ImagePlane> frames,
                                                     const MetricParams& params) {
  if (frames.size() < 2) throw ArgumentError("decorrelation needs at least two frames");
  std::vector<DecorrelationPoint> series;
  series.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    series.push_back({i, ssim(frames[0], frames[i], params)});
  }
  return series;
}

ImagePlane mean_image(const PairSet& pairs, std::size_t begin, std::size_t end) {
  if (begin >= end || end > pairs.size()) throw ArgumentError("invalid record range");
  std::vector<double> acc(pairs.image_length(), 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    const auto values = pairs[i].image.values();
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += values[p];
  }
  std::vector<float> out(acc.size());
  const auto n = static_cast<double>(end - begin);
  std::transform(acc.begin(), acc.end(), out.begin(),
                 [&](double v) { return static_cast<float>(std::clamp(v / n, 0.0, 1.0)); });
  return ImagePlane(pairs.image_width(), pairs.image_height(), std::move(out));
}

}  // namespace fibrelens
