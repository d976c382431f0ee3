#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stylesearch {

using RealMatrix = std::vector<std::vector<double>>;

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint64_t>> counts;

  std::size_t n_classes() const { return counts.size(); }
  std::uint64_t total() const;
  std::uint64_t trace() const;
};

// Throws ContractError on a length mismatch or an index >= n_classes.
// `labels`, when given, must have n_classes entries.
ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                          std::size_t n_classes, std::vector<std::string> labels = {});

// Each nonempty row divided by its sum; empty rows become zeros.
RealMatrix normalize_rows(const ConfusionMatrix& matrix);
RealMatrix normalize_rows(const RealMatrix& matrix);

struct PRPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  // One point per distinct score, thresholds descending, recall
  // non-decreasing.
  std::vector<PRPoint> points;
  // Sum over points of (recall_i - recall_{i-1}) * precision_i.
  double average_precision = 0.0;
};

// One-vs-rest curve. Throws ContractError on a length mismatch or when truth
// has no positives.
PRCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);

// Fraction of equal entries; ContractError on empty or mismatched input.
double accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

struct EvalReport {
  std::vector<std::string> vocabulary;
  std::size_t samples = 0;
  double accuracy = 0.0;
  ConfusionMatrix matrix;
  RealMatrix normalized;
  // Classes without positives in the evaluated set have no curve.
  std::vector<std::optional<PRCurve>> curves;
  // Mean AP over classes that have a curve.
  double mean_average_precision = 0.0;

  // {"samples", "accuracy", "vocabulary", "confusion", "normalized_confusion",
  //  "average_precision": [per class or null], "mean_average_precision",
  //  "pr_curves": [[{"threshold","recall","precision"}...] or null]}
  std::string to_json(int indent = 2) const;
  // Header row of labels, then one row per true class.
  std::string confusion_csv() const;
  std::string normalized_csv() const;
  // Aligned text rendering of the normalized matrix.
  std::string render_normalized() const;
};

// probabilities[i] holds per-class scores for sample i; the predicted class
// is its argmax (first on ties).
EvalReport evaluate_predictions(std::span<const std::size_t> truth,
                                std::span<const std::vector<double>> probabilities,
                                const std::vector<std::string>& vocabulary);

}  // namespace stylesearch
