#include "stylesearch/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "stylesearch/errors.hpp"

namespace stylesearch {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts) sum = std::accumulate(row.begin(), row.end(), sum);
  return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) sum += counts[i][i];
  return sum;
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                          std::size_t n_classes, std::vector<std::string> labels) {
  if (truth.size() != predicted.size()) throw ContractError("confusion: truth and predictions differ in length");
  if (!labels.empty() && labels.size() != n_classes) throw ContractError("confusion: label count mismatch");
  ConfusionMatrix m;
  m.labels = std::move(labels);
  m.counts.assign(n_classes, std::vector<std::uint64_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes || predicted[i] >= n_classes) {
      throw ContractError("confusion: class index out of range at sample " + std::to_string(i));
    }
    ++m.counts[truth[i]][predicted[i]];
  }
  return m;
}

RealMatrix normalize_rows(const RealMatrix& matrix) {
  RealMatrix out = matrix;
  for (auto& row : out) {
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& v : row) v = sum > 0.0 ? v / sum : 0.0;
  }
  return out;
}

RealMatrix normalize_rows(const ConfusionMatrix& matrix) {
  RealMatrix real;
  for (const auto& row : matrix.counts) real.emplace_back(row.begin(), row.end());
  return normalize_rows(real);
}

PRCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ContractError("pr_curve: scores and truth differ in length");
  const auto positives = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](auto t) { return t != 0; }));
  if (positives == 0) throw ContractError("pr_curve: no positive samples");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PRCurve curve;
  std::size_t tp = 0;
  std::size_t fp = 0;
  double previous_recall = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (truth[order[i]] ? tp : fp) += 1;
      ++i;
    }
    PRPoint point;
    point.threshold = threshold;
    point.recall = static_cast<double>(tp) / static_cast<double>(positives);
    point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.average_precision += (point.recall - previous_recall) * point.precision;
    previous_recall = point.recall;
    curve.points.push_back(point);
  }
  return curve;
}

double accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
  if (truth.empty()) throw ContractError("accuracy: empty input");
  if (truth.size() != predicted.size()) throw ContractError("accuracy: truth and predictions differ in length");
  std::size_t same = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) same += truth[i] == predicted[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(truth.size());
}

EvalReport evaluate_predictions(std::span<const std::size_t> truth,
                                std::span<const std::vector<double>> probabilities,
                                const std::vector<std::string>& vocabulary) {
  if (truth.size() != probabilities.size()) throw ContractError("evaluate: truth and probabilities differ in length");
  const std::size_t n = vocabulary.size();
  std::vector<std::size_t> predicted;
  predicted.reserve(truth.size());
  for (const auto& p : probabilities) {
    if (p.size() != n) throw ContractError("evaluate: probability vector length differs from vocabulary");
    predicted.push_back(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  EvalReport report;
  report.vocabulary = vocabulary;
  report.samples = truth.size();
  report.matrix = confusion(truth, predicted, n, vocabulary);
  report.accuracy = accuracy(truth, predicted);
  report.normalized = normalize_rows(report.matrix);
  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> scores;
    std::vector<std::uint8_t> is_class;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      scores.push_back(probabilities[i][c]);
      is_class.push_back(truth[i] == c ? 1 : 0);
    }
    if (std::find(is_class.begin(), is_class.end(), 1) == is_class.end()) {
      report.curves.emplace_back(std::nullopt);
      continue;
    }
    report.curves.emplace_back(pr_curve(scores, is_class));
    ap_sum += report.curves.back()->average_precision;
    ++ap_count;
  }
  report.mean_average_precision = ap_count ? ap_sum / static_cast<double>(ap_count) : 0.0;
  return report;
}

std::string EvalReport::to_json(int indent) const {
  nlohmann::json j;
  j["samples"] = samples;
  j["accuracy"] = accuracy;
  j["vocabulary"] = vocabulary;
  j["confusion"] = matrix.counts;
  j["normalized_confusion"] = normalized;
  nlohmann::json aps = nlohmann::json::array();
  nlohmann::json curves_json = nlohmann::json::array();
  for (const auto& curve : curves) {
    if (!curve) {
      aps.push_back(nullptr);
      curves_json.push_back(nullptr);
      continue;
    }
    aps.push_back(curve->average_precision);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : curve->points) {
      points.push_back({{"threshold", p.threshold}, {"recall", p.recall}, {"precision", p.precision}});
    }
    curves_json.push_back(std::move(points));
  }
  j["average_precision"] = std::move(aps);
  j["mean_average_precision"] = mean_average_precision;
  j["pr_curves"] = std::move(curves_json);
  return j.dump(indent);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename Row>
std::string matrix_csv(const std::vector<std::string>& labels, const std::vector<Row>& rows) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& l : labels) out << ',' << csv_field(l);
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << csv_field(r < labels.size() ? labels[r] : std::to_string(r));
    for (const auto& v : rows[r]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string EvalReport::confusion_csv() const { return matrix_csv(vocabulary, matrix.counts); }

std::string EvalReport::normalized_csv() const { return matrix_csv(vocabulary, normalized); }

std::string EvalReport::render_normalized() const {
  std::size_t label_width = 4;
  for (const auto& l : vocabulary) label_width = std::max(label_width, l.size());
  std::ostringstream out;
  out << std::string(label_width, ' ');
  for (std::size_t c = 0; c < normalized.size(); ++c) out << ' ' << std::setw(6) << c;
  out << '\n';
  for (std::size_t r = 0; r < normalized.size(); ++r) {
    const std::string name = r < vocabulary.size() ? vocabulary[r] : std::to_string(r);
    out << std::left << std::setw(static_cast<int>(label_width)) << name << std::right;
    for (double v : normalized[r]) out << ' ' << std::setw(6) << std::fixed << std::setprecision(3) << v;
    out << "  [" << r << "]\n";
  }
  return out.str();
}

}  // namespace stylesearch
