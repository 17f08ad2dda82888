#pragma once

#include <stdexcept>
#include <string>

namespace ici {

/// Invalid configuration or mismatched dimensions supplied by the caller.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition on an operator or signal was broken.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A simulated signal left the finite range. `step` is the first offending
/// time index, or -1 when the detecting routine does not know it.
class DivergedRun : public std::runtime_error {
 public:
  DivergedRun(long step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(long epoch, long trajectory, const std::string& what)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ", trajectory " +
                           std::to_string(trajectory) + ")"),
        epoch_(epoch),
        trajectory_(trajectory) {}
  long epoch() const noexcept { return epoch_; }
  long trajectory() const noexcept { return trajectory_; }

 private:
  long epoch_;
  long trajectory_;
};

}  // namespace ici
