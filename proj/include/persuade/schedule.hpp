#pragma once

#include <cstddef>
#include <span>

namespace persuade {

/// Step decay: base_lr * factor^floor(epoch / step), epoch counted from 0.
double lr_at_epoch(double base_lr, double factor, std::size_t step, std::size_t epoch);

/// True iff each of the last `patience` entries failed to strictly improve
/// on the running minimum before it.
bool early_stop_check(std::span<const double> dev_loss_history, std::size_t patience);

}  // namespace persuade
