#include "semaforge/forensics/auc.hpp"

#include <algorithm>
#include <numeric>

#include "semaforge/error.hpp"

namespace semaforge::forensics {

namespace {

void check(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
}

std::vector<std::size_t> sorted_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check(scores, labels);
  const auto order = sorted_order(scores);
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InsufficientSamplesError("AUC needs both classes");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double max_accuracy(std::span<const double> scores, std::span<const int> labels) {
  check(scores, labels);
  if (scores.empty()) throw InsufficientSamplesError("no scores");
  const auto order = sorted_order(scores);
  const std::size_t n = scores.size();
  std::size_t pos_total = 0;
  for (auto l : labels) pos_total += l == 1;
  // threshold just above everything: all negative
  std::size_t correct = n - pos_total, best = correct;
  for (std::size_t i = n; i > 0;) {
    std::size_t j = i;
    while (j > 0 && scores[order[j - 1]] == scores[order[i - 1]]) {
      --j;
      correct += labels[order[j]] == 1 ? 1 : std::size_t(-1);
    }
    best = std::max(best, correct);
    i = j;
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check(scores, labels);
  if (scores.empty()) throw InsufficientSamplesError("no scores");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= threshold) == (labels[i] == 1);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

}  // namespace semaforge::forensics
