#include "persuade/schedule.hpp"

#include <cmath>

#include "persuade/errors.hpp"

namespace persuade {

double lr_at_epoch(double base_lr, double factor, std::size_t step, std::size_t epoch) {
  if (step == 0) throw ValidationError("scheduler step must be positive");
  return base_lr * std::pow(factor, static_cast<double>(epoch / step));
}

bool early_stop_check(std::span<const double> dev_loss_history, std::size_t patience) {
  if (dev_loss_history.empty()) throw ValidationError("early stopping needs at least one dev loss");
  if (patience == 0) throw ValidationError("patience must be positive");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_loss_history.size(); ++i) {
    if (dev_loss_history[i] < dev_loss_history[best]) best = i;
  }
  return dev_loss_history.size() - 1 - best >= patience;
}

}  // namespace persuade
