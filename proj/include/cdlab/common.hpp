#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace cdlab {

// Thrown when an operation requires a classifier with nonzero weights.
struct degenerate_classifier_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Hard-thresholding removed every coordinate (eps too large for mu).
struct no_robust_direction_error : std::domain_error {
  using std::domain_error::domain_error;
};

struct training_diverged_error : std::runtime_error {
  explicit training_diverged_error(long iteration)
      : std::runtime_error("training diverged at iteration " + std::to_string(iteration)),
        iteration(iteration) {}
  long iteration;
};

struct guidance_diverged_error : std::runtime_error {
  guidance_diverged_error(int step, int chain)
      : std::runtime_error("guided sampling produced a non-finite iterate at step " +
                           std::to_string(step) + ", chain " + std::to_string(chain)),
        step(step),
        chain(chain) {}
  int step;
  int chain;
};

struct insufficient_class_size_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct empty_negative_set_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace cdlab
