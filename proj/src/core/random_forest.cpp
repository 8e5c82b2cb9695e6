#include <algorithm>
#include <cmath>
#include <numeric>

#include "random.hpp"
#include "regressors.hpp"

namespace ndcp {

namespace {

// Incremental mean: exact for constant inputs.
template <typename It, typename F>
double running_mean(It first, It last, F value) {
  double m = 0.0;
  double k = 0.0;
  for (; first != last; ++first) {
    k += 1.0;
    m += (value(*first) - m) / k;
  }
  return m;
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::size_t min_leaf, std::size_t mtry, Rng& rng)
      : data_(data), min_leaf_(min_leaf), mtry_(mtry), rng_(rng) {
    features_.resize(data.feature_count());
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  RandomForest::Tree build(std::vector<std::size_t> sample) {
    RandomForest::Tree tree;
    grow(tree, std::move(sample));
    return tree;
  }

 private:
  int grow(RandomForest::Tree& tree, std::vector<std::size_t> idx) {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();
    const double mean = running_mean(idx.begin(), idx.end(), [&](std::size_t i) { return data_.label(i); });
    tree[static_cast<std::size_t>(id)].value = mean;

    const bool pure = std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return data_.label(i) == data_.label(idx[0]); });
    if (pure || idx.size() < 2 * min_leaf_) return id;

    auto split = best_split(idx, mean);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) {
      (data_.row(i)[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(tree, std::move(left));
    const int r = grow(tree, std::move(right));
    auto& node = tree[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitCandidate best_split(const std::vector<std::size_t>& idx, double mean) {
    // Partial Fisher-Yates draws mtry distinct candidate features.
    for (std::size_t k = 0; k < mtry_; ++k) {
      std::swap(features_[k], features_[k + uniform_index(rng_, features_.size() - k)]);
    }
    const std::size_t n = idx.size();
    SplitCandidate best;
    std::vector<std::pair<double, double>> column(n);
    for (std::size_t k = 0; k < mtry_; ++k) {
      const std::size_t f = features_[k];
      for (std::size_t r = 0; r < n; ++r) column[r] = {data_.row(idx[r])[f], data_.label(idx[r]) - mean};
      std::sort(column.begin(), column.end());
      double total = 0.0;
      for (const auto& c : column) total += c.second;
      double left_sum = 0.0;
      for (std::size_t m = 1; m < n; ++m) {
        left_sum += column[m - 1].second;
        if (m < min_leaf_ || n - m < min_leaf_) continue;
        if (!(column[m - 1].first < column[m].first)) continue;
        const double right_sum = total - left_sum;
        // Between-group sum of squares; maximizing it minimizes child SSE.
        const double score = left_sum * left_sum / static_cast<double>(m) +
                             right_sum * right_sum / static_cast<double>(n - m);
        // Relative slack so exact ties (e.g. two features inducing the same
        // partition) keep the earlier candidate regardless of rounding.
        if (best.feature < 0 || score > best.score + 1e-12 * std::abs(best.score)) {
          double threshold = column[m - 1].first + (column[m].first - column[m - 1].first) / 2.0;
          if (!(threshold < column[m].first)) threshold = column[m - 1].first;
          best = {static_cast<int>(f), threshold, score};
        }
      }
    }
    if (best.feature >= 0 && !(best.score > 1e-12 * static_cast<double>(n))) best.feature = -1;
    return best;
  }

  const Dataset& data_;
  std::size_t min_leaf_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<std::size_t> features_;
};

}  // namespace

RandomForest::RandomForest(std::vector<Tree> trees, std::size_t feature_count)
    : trees_(std::move(trees)), feature_count_(feature_count) {}

double RandomForest::predict(std::span<const double> x) const {
  if (x.size() != feature_count_) throw std::invalid_argument("random forest: feature length mismatch");
  return running_mean(trees_.begin(), trees_.end(), [&](const Tree& tree) {
    std::size_t node = 0;
    while (tree[node].feature >= 0) {
      node = static_cast<std::size_t>(x[static_cast<std::size_t>(tree[node].feature)] <= tree[node].threshold
                                          ? tree[node].left
                                          : tree[node].right);
    }
    return tree[node].value;
  });
}

std::shared_ptr<const RandomForest> fit_random_forest(const Dataset& train, std::size_t trees, std::size_t min_leaf,
                                                      std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("random forest: empty training set");
  if (trees < 1) throw std::invalid_argument("random forest: trees must be >= 1");
  if (min_leaf < 1) throw std::invalid_argument("random forest: min_leaf must be >= 1");
  const std::size_t p = train.feature_count();
  const std::size_t mtry = std::max<std::size_t>(1, (p + 2) / 3);
  const std::size_t n = train.size();

  std::vector<RandomForest::Tree> forest;
  forest.reserve(trees);
  for (std::size_t t = 0; t < trees; ++t) {
    Rng rng(derive_seed(seed, {t}));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = uniform_index(rng, n);
    TreeBuilder builder(train, min_leaf, mtry, rng);
    forest.push_back(builder.build(std::move(sample)));
  }
  return std::make_shared<const RandomForest>(std::move(forest), p);
}

}  // namespace ndcp
