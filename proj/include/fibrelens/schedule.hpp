#pragma once

#include <cstddef>
#include <limits>
#include <span>

#include "fibrelens/inversion.hpp"

namespace fibrelens {

// Reduce-on-plateau learning-rate schedule monitoring the training loss.
//
// An epoch improves when loss < best - threshold. After `patience`
// consecutive epochs without improvement the rate is multiplied by `factor`
// (never going below `min_lr`) and the wait counter resets.
class PlateauScheduler {
 public:
  struct State {
    double lr = 0.0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t wait = 0;
  };

  explicit PlateauScheduler(const TrainConfig& cfg);
  PlateauScheduler(double lr, double factor, std::size_t patience, double threshold, double min_lr);

  // Records one epoch's loss and returns the rate for the next epoch.
  double update(double loss);

  double lr() const noexcept { return state_.lr; }
  const State& state() const noexcept { return state_; }

 private:
  State state_;
  double factor_;
  std::size_t patience_;
  double threshold_;
  double min_lr_;
};

// Stops once `patience` consecutive epochs fail to beat best - min_delta.
class EarlyStopping {
 public:
  explicit EarlyStopping(const TrainConfig& cfg);
  EarlyStopping(double min_delta, std::size_t patience);

  // Records one epoch's loss; true when training should stop.
  bool update(double loss);

  double best() const noexcept { return best_; }
  std::size_t wait() const noexcept { return wait_; }

 private:
  double min_delta_;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

// Replays a loss history from the start of a run; returns the learning rate after the last epoch.
double plateau_update(std::span<const double> history, const TrainConfig& cfg);

// Replays a loss history; true if the stop condition has been reached by its last epoch.
bool early_stop(std::span<const double> history, const TrainConfig& cfg);

}  // namespace fibrelens
