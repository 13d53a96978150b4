#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lehgr/types.hpp"

namespace lehgr {

// Classification report: per-class recall/precision, overall accuracy,
// false-positive rate (truth-negative samples predicted non-negative), and
// the confusion matrix (rows = truth, columns = prediction). Undefined 0/0
// rates are reported as 0 with the matching defined-flag cleared.
struct MetricsReport {
  int classes = 0;
  std::size_t samples = 0;
  double accuracy = 0.0;
  double false_positive_rate = 0.0;
  bool false_positive_defined = true;
  std::vector<double> recall;
  std::vector<double> precision;
  std::vector<bool> recall_defined;
  std::vector<bool> precision_defined;
  std::vector<std::size_t> truth_counts;
  std::vector<std::vector<std::size_t>> confusion;
};

// Throws Error(InvalidInput) on length mismatch or out-of-range labels.
MetricsReport metrics(std::span<const int> predictions,
                      std::span<const int> truths, int classes);

// Fixed-width text report; label names are optional.
std::string format_report(const MetricsReport& report,
                          const LabelSet* labels = nullptr);

// Versioned CSV confusion matrix.
void write_confusion_csv(std::ostream& out, const MetricsReport& report);

}  // namespace lehgr
