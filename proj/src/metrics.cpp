#include "moralscope/model.hpp"

#include <numeric>

namespace moralscope::model {

F1Scores evaluate_f1(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.empty()) throw num::InvalidArgument("evaluate_f1: empty input");
  if (predictions.size() != gold.size()) throw num::InvalidArgument("evaluate_f1: length mismatch");
  long confusion[2][2] = {{0, 0}, {0, 0}};  // [gold][pred]
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if ((gold[i] != 0 && gold[i] != 1) || (predictions[i] != 0 && predictions[i] != 1)) {
      throw num::InvalidArgument("evaluate_f1: labels must be 0 or 1");
    }
    ++confusion[gold[i]][predictions[i]];
  }
  // Classes absent from both gold and predictions do not enter the average.
  int present = 0;
  for (int c = 0; c < 2; ++c) {
    if (confusion[c][0] + confusion[c][1] + confusion[0][c] + confusion[1][c] > 0) ++present;
  }
  const double w = 100.0 / present;
  F1Scores s;
  for (int c = 0; c < 2; ++c) {
    if (confusion[c][0] + confusion[c][1] + confusion[0][c] + confusion[1][c] == 0) continue;
    const double tp = static_cast<double>(confusion[c][c]);
    const double fp = static_cast<double>(confusion[1 - c][c]);
    const double fn = static_cast<double>(confusion[c][1 - c]);
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    s.precision += w * p;
    s.recall += w * r;
    s.macro_f1 += w * f;
  }
  return s;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw num::InvalidArgument("stratified_folds: need at least 2 folds");
  std::vector<int> assignment(labels.size(), 0);
  num::Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) assignment[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  return assignment;
}

F1Scores cross_validate(std::span<const int> labels, int folds, std::uint64_t seed,
                        const std::function<std::vector<int>(const std::vector<std::size_t>&,
                                                             const std::vector<std::size_t>&)>& fit_predict) {
  const auto assignment = stratified_folds(labels, folds, seed);
  F1Scores mean;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) (assignment[i] == f ? test_idx : train_idx).push_back(i);
    const auto preds = fit_predict(train_idx, test_idx);
    std::vector<int> gold;
    for (auto i : test_idx) gold.push_back(labels[i]);
    const F1Scores s = evaluate_f1(preds, gold);
    mean.macro_f1 += s.macro_f1 / folds;
    mean.precision += s.precision / folds;
    mean.recall += s.recall / folds;
  }
  return mean;
}

}  // namespace moralscope::model
