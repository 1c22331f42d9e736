#include "fibrelens/schedule.hpp"

#include <algorithm>

#include "fibrelens/error.hpp"

namespace fibrelens {

PlateauScheduler::PlateauScheduler(const TrainConfig& cfg)
    : PlateauScheduler(cfg.lr, cfg.plateau_factor, cfg.plateau_patience, cfg.plateau_threshold,
                       cfg.resolved_min_lr()) {}

PlateauScheduler::PlateauScheduler(double lr, double factor, std::size_t patience,
                                   double threshold, double min_lr)
    : factor_(factor), patience_(patience), threshold_(threshold), min_lr_(min_lr) {
  state_.lr = lr;
}

double PlateauScheduler::update(double loss) {
  if (loss < state_.best - threshold_) {
    state_.best = loss;
    state_.wait = 0;
  } else if (++state_.wait >= patience_) {
    state_.lr = std::max(state_.lr * factor_, min_lr_);
    state_.wait = 0;
  }
  return state_.lr;
}

EarlyStopping::EarlyStopping(const TrainConfig& cfg)
    : EarlyStopping(cfg.stop_min_delta, cfg.stop_patience) {}

EarlyStopping::EarlyStopping(double min_delta, std::size_t patience)
    : min_delta_(min_delta), patience_(patience) {}

bool EarlyStopping::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    wait_ = 0;
    return false;
  }
  return ++wait_ >= patience_;
}

double plateau_update(std::span<const double> history, const TrainConfig& cfg) {
  if (history.empty()) throw ArgumentError("loss history is empty");
  PlateauScheduler scheduler(cfg);
  for (double loss : history) scheduler.update(loss);
  return scheduler.lr();
}

bool early_stop(std::span<const double> history, const TrainConfig& cfg) {
  if (history.empty()) throw ArgumentError("loss history is empty");
  EarlyStopping stopper(cfg);
  bool stop = false;
  for (double loss : history) stop = stopper.update(loss);
  return stop;
}

}  // namespace fibrelens
