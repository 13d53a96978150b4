#include <doctest.h>

#include <sstream>
#include <vector>

#include "lehgr/error.hpp"
#include "lehgr/metrics.hpp"
#include "lehgr/rng.hpp"

using namespace lehgr;

TEST_CASE("perfect predictions give a diagonal matrix") {
  const std::vector<int> truths{0, 1, 2, 0, 1, 2};
  const MetricsReport report = metrics(truths, truths, 3);
  CHECK(report.accuracy == 1.0);
  CHECK(report.false_positive_rate == 0.0);
  for (int c = 0; c < 3; ++c) {
    CHECK(report.recall[static_cast<std::size_t>(c)] == 1.0);
    CHECK(report.precision[static_cast<std::size_t>(c)] == 1.0);
    for (int p = 0; p < 3; ++p) {
      const std::size_t expected = c == p ? 2 : 0;
      CHECK(report.confusion[static_cast<std::size_t>(c)]
                            [static_cast<std::size_t>(p)] == expected);
    }
  }
}

TEST_CASE("the degenerate all-negative predictor") {
  const std::vector<int> truths{0, 0, 1, 2};
  const std::vector<int> preds{0, 0, 0, 0};
  const MetricsReport report = metrics(preds, truths, 3);
  CHECK(report.accuracy == 0.5);
  CHECK(report.false_positive_rate == 0.0);
  CHECK(report.recall[1] == 0.0);
  CHECK(report.recall[2] == 0.0);
  CHECK(report.precision_defined[1] == false);
  CHECK(report.precision_defined[2] == false);
}

TEST_CASE("hand-counted three-class example") {
  const std::vector<int> truths{0, 0, 1, 1, 2};
  const std::vector<int> preds{0, 1, 1, 1, 2};
  const MetricsReport report = metrics(preds, truths, 3);
  CHECK(report.accuracy == doctest::Approx(0.8));
  CHECK(report.false_positive_rate == doctest::Approx(0.5));
  CHECK(report.recall[1] == doctest::Approx(1.0));
  CHECK(report.precision[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("metrics are invariant under joint permutation") {
  Rng rng(14);
  std::vector<int> truths, preds;
  for (int i = 0; i < 200; ++i) {
    truths.push_back(static_cast<int>(rng.below(3)));
    preds.push_back(static_cast<int>(rng.below(3)));
  }
  const MetricsReport base = metrics(preds, truths, 3);

  std::vector<std::size_t> order(truths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> truths_shuffled, preds_shuffled;
  for (std::size_t i : order) {
    truths_shuffled.push_back(truths[i]);
    preds_shuffled.push_back(preds[i]);
  }
  const MetricsReport shuffled = metrics(preds_shuffled, truths_shuffled, 3);
  CHECK(shuffled.accuracy == base.accuracy);
  CHECK(shuffled.false_positive_rate == base.false_positive_rate);
  CHECK(shuffled.confusion == base.confusion);
}

TEST_CASE("confusion matrix identities") {
  Rng rng(15);
  std::vector<int> truths, preds;
  for (int i = 0; i < 500; ++i) {
    truths.push_back(static_cast<int>(rng.below(4)));
    preds.push_back(static_cast<int>(rng.below(4)));
  }
  const MetricsReport report = metrics(preds, truths, 4);

  std::size_t total = 0;
  std::size_t diagonal = 0;
  for (int t = 0; t < 4; ++t) {
    std::size_t row_sum = 0;
    for (int p = 0; p < 4; ++p) {
      row_sum += report.confusion[static_cast<std::size_t>(t)]
                                 [static_cast<std::size_t>(p)];
    }
    CHECK(row_sum == report.truth_counts[static_cast<std::size_t>(t)]);
    total += row_sum;
    diagonal += report.confusion[static_cast<std::size_t>(t)]
                                [static_cast<std::size_t>(t)];
  }
  CHECK(total == report.samples);
  CHECK(report.accuracy ==
        static_cast<double>(diagonal) / static_cast<double>(total));

  // Precision is recomputable from the matrix columns.
  for (int c = 0; c < 4; ++c) {
    std::size_t column = 0;
    for (int t = 0; t < 4; ++t) {
      column += report.confusion[static_cast<std::size_t>(t)]
                                [static_cast<std::size_t>(c)];
    }
    if (column > 0) {
      CHECK(report.precision[static_cast<std::size_t>(c)] ==
            static_cast<double>(report.confusion[static_cast<std::size_t>(c)]
                                                [static_cast<std::size_t>(c)]) /
                static_cast<double>(column));
    }
  }
}

TEST_CASE("metrics validates its inputs") {
  const std::vector<int> truths{0, 1};
  const std::vector<int> short_preds{0};
  CHECK_THROWS_AS(metrics(short_preds, truths, 3), Error);
  const std::vector<int> bad{0, 9};
  CHECK_THROWS_AS(metrics(bad, truths, 3), Error);
}

TEST_CASE("report text and CSV are stable") {
  const std::vector<int> truths{0, 0, 1, 1, 2};
  const std::vector<int> preds{0, 1, 1, 1, 2};
  const LabelSet labels = default_labels();
  const MetricsReport report = metrics(preds, truths, 3);

  const std::string text = format_report(report, &labels);
  CHECK(text.find("accuracy: 0.8000") != std::string::npos);
  CHECK(text.find("false_positive_rate: 0.5000") != std::string::npos);
  CHECK(text.find("1 lwave") != std::string::npos);

  std::stringstream csv;
  write_confusion_csv(csv, report);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "# schema: lehgr.confusion.v1");
  std::getline(csv, line);
  CHECK(line == "truth,pred_0,pred_1,pred_2");
  std::getline(csv, line);
  CHECK(line == "0,1,1,0");
}
