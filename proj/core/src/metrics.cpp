#include "lehgr/metrics.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "lehgr/error.hpp"

namespace lehgr {

MetricsReport metrics(std::span<const int> predictions,
                      std::span<const int> truths, int classes) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorCode::InvalidInput,
                "predictions and truths differ in length (" +
                    std::to_string(predictions.size()) + " vs " +
                    std::to_string(truths.size()) + ")");
  }
  if (classes < 2) {
    throw Error(ErrorCode::InvalidInput, "need at least two classes");
  }

  MetricsReport report;
  report.classes = classes;
  report.samples = truths.size();
  report.confusion.assign(static_cast<std::size_t>(classes),
                          std::vector<std::size_t>(static_cast<std::size_t>(classes), 0));
  report.truth_counts.assign(static_cast<std::size_t>(classes), 0);

  std::size_t correct = 0;
  std::size_t negatives = 0;
  std::size_t false_positives = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int truth = truths[i];
    const int pred = predictions[i];
    if (truth < 0 || truth >= classes || pred < 0 || pred >= classes) {
      throw Error(ErrorCode::InvalidInput, "label outside [0,classes)");
    }
    ++report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    ++report.truth_counts[static_cast<std::size_t>(truth)];
    if (truth == pred) ++correct;
    if (truth == 0) {
      ++negatives;
      if (pred != 0) ++false_positives;
    }
  }

  report.accuracy = report.samples > 0
                        ? static_cast<double>(correct) /
                              static_cast<double>(report.samples)
                        : 0.0;
  if (negatives > 0) {
    report.false_positive_rate =
        static_cast<double>(false_positives) / static_cast<double>(negatives);
  } else {
    report.false_positive_rate = 0.0;
    report.false_positive_defined = false;
  }

  report.recall.assign(static_cast<std::size_t>(classes), 0.0);
  report.precision.assign(static_cast<std::size_t>(classes), 0.0);
  report.recall_defined.assign(static_cast<std::size_t>(classes), true);
  report.precision_defined.assign(static_cast<std::size_t>(classes), true);
  for (int c = 0; c < classes; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    std::size_t predicted = 0;
    for (int t = 0; t < classes; ++t) {
      predicted += report.confusion[static_cast<std::size_t>(t)][ci];
    }
    const std::size_t hits = report.confusion[ci][ci];
    if (report.truth_counts[ci] > 0) {
      report.recall[ci] = static_cast<double>(hits) /
                          static_cast<double>(report.truth_counts[ci]);
    } else {
      report.recall_defined[ci] = false;
    }
    if (predicted > 0) {
      report.precision[ci] =
          static_cast<double>(hits) / static_cast<double>(predicted);
    } else {
      report.precision_defined[ci] = false;
    }
  }
  return report;
}

std::string format_report(const MetricsReport& report, const LabelSet* labels) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "samples: " << report.samples << "  classes: " << report.classes
      << '\n';
  out << "accuracy: " << report.accuracy << "  false_positive_rate: "
      << report.false_positive_rate
      << (report.false_positive_defined ? "" : " (no negatives)") << '\n';
  out << std::left << std::setw(16) << "class" << std::right << std::setw(8)
      << "truth" << std::setw(10) << "recall" << std::setw(11) << "precision"
      << '\n';
  for (int c = 0; c < report.classes; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    std::string name = std::to_string(c);
    if (labels != nullptr && c < labels->count()) {
      name += " " + labels->labels[ci].name;
    }
    out << std::left << std::setw(16) << name << std::right << std::setw(8)
        << report.truth_counts[ci];
    if (report.recall_defined[ci]) {
      out << std::setw(10) << report.recall[ci];
    } else {
      out << std::setw(10) << "-";
    }
    if (report.precision_defined[ci]) {
      out << std::setw(11) << report.precision[ci];
    } else {
      out << std::setw(11) << "-";
    }
    out << '\n';
  }
  out << "confusion (rows=truth, cols=pred):\n";
  out << std::setw(6) << "";
  for (int c = 0; c < report.classes; ++c) {
    out << std::setw(8) << c;
  }
  out << '\n';
  for (int t = 0; t < report.classes; ++t) {
    out << std::setw(6) << t;
    for (int p = 0; p < report.classes; ++p) {
      out << std::setw(8)
          << report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    out << '\n';
  }
  return out.str();
}

void write_confusion_csv(std::ostream& out, const MetricsReport& report) {
  out << "# schema: lehgr.confusion.v1\n";
  out << "truth";
  for (int c = 0; c < report.classes; ++c) {
    out << ",pred_" << c;
  }
  out << '\n';
  for (int t = 0; t < report.classes; ++t) {
    out << t;
    for (int p = 0; p < report.classes; ++p) {
      out << ','
          << report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    out << '\n';
  }
}

}  // namespace lehgr
