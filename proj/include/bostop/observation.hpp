// Copyright 2026 The bostop Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bostop/error.hpp"
#include "bostop/space.hpp"

namespace bostop {

struct Observation {
  std::size_t iteration = 0;
  Candidate candidate;
  double y = 0.0;
  std::optional<std::vector<double>> fold_values;
  double eval_seconds = 0.0;
  std::optional<double> test_metric;
};

/// Evaluated points G_t with their values, in evaluation order.
class ObservationLog {
 public:
  ObservationLog() = default;

  /// Appends the next evaluation; iterations must run 1..t without gaps.
  void append(Observation obs) {
    if (obs.iteration != records_.size() + 1) {
      throw InvalidArgument("observation log: expected iteration " + std::to_string(records_.size() + 1) +
                            ", got " + std::to_string(obs.iteration));
    }
    check(obs);
    records_.push_back(std::move(obs));
  }

  /// A log holding an arbitrary subset of another log's records, order kept.
  static ObservationLog subset(std::vector<Observation> records) {
    ObservationLog log;
    for (const auto& r : records) check(r);
    log.records_ = std::move(records);
    return log;
  }

  const std::vector<Observation>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Observation& operator[](std::size_t i) const { return records_[i]; }

  std::vector<Candidate> candidates() const {
    std::vector<Candidate> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.candidate);
    return out;
  }

  Eigen::VectorXd values() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(records_.size()));
    for (std::size_t i = 0; i < records_.size(); ++i) y[static_cast<Eigen::Index>(i)] = records_[i].y;
    return y;
  }

 private:
  static void check(const Observation& obs) {
    if (!std::isfinite(obs.y)) throw InvalidArgument("observation log: y must be finite");
    if (!(obs.eval_seconds >= 0.0)) throw InvalidArgument("observation log: eval_seconds must be >= 0");
  }

  std::vector<Observation> records_;
};

/// Best evaluated point so far; replaced only on strict improvement.
struct Incumbent {
  Candidate candidate;
  double value = 0.0;
  std::size_t iteration_found = 0;
  std::optional<double> cv_corrected_variance;
  std::optional<double> test_metric;
};

}  // namespace bostop
