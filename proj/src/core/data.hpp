#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ndcp {

/// Raised by ingestion when a file cannot be read or a cell is malformed.
/// `row` and `column` are 1-based file coordinates (header is row 1); 0 means
/// the location does not apply.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t row = 0, std::size_t column = 0);

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// A single labelled observation, borrowed from a Dataset.
struct Example {
  std::span<const double> features;
  double label;
};

/// Immutable table of examples sharing a feature count. Features are stored
/// row-major in one contiguous buffer.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t feature_count, std::vector<double> features, std::vector<double> labels,
          std::vector<std::string> feature_names = {}, std::string label_name = "y");

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t feature_count() const noexcept { return feature_count_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * feature_count_, feature_count_};
  }
  double label(std::size_t i) const { return labels_[i]; }
  Example operator[](std::size_t i) const { return {row(i), labels_[i]}; }

  std::span<const double> labels() const noexcept { return labels_; }
  std::span<const double> feature_data() const noexcept { return features_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::string& label_name() const noexcept { return label_name_; }

  /// Rows in the given order; indices may repeat (bootstrap samples).
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Same features with replacement labels.
  Dataset with_labels(std::vector<double> labels) const;

 private:
  std::size_t feature_count_ = 0;
  std::vector<double> features_;
  std::vector<double> labels_;
  std::vector<std::string> feature_names_;
  std::string label_name_ = "y";
};

/// Reads a comma-separated numeric table with one header row. `label_column`
/// is a header name or a 0-based column index; empty selects the last column.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column = {});

/// Parses CSV text directly; `source` is only used in diagnostics.
Dataset parse_csv(const std::string& text, const std::string& label_column = {},
                  const std::string& source = "<memory>");

/// Writes features followed by the label column, with a header row.
void write_csv(const Dataset& d, const std::filesystem::path& path);

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Random disjoint split; test size = round(size * test_fraction).
SplitResult train_test_split_indices(std::size_t size, double test_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction, std::uint64_t seed);

enum class PartitionScheme { Equal, Unequal, NonIID };

std::string to_string(PartitionScheme s);
PartitionScheme partition_scheme_from_string(const std::string& s);

struct PartitionPlan {
  PartitionScheme scheme = PartitionScheme::Equal;
  std::size_t source_count = 2;
  std::uint64_t seed = 0;
  double non_iid_quantile = 0.75;
  double non_iid_boost = 2.0;
  /// Relative weight of shard 1 in the Unequal scheme (others weigh 1).
  double unequal_ratio = 2.0;

  void validate() const;
};

/// Shard sizes the plan assigns to a training set of `total` examples, before
/// any label-dependent placement.
std::vector<std::size_t> shard_sizes(const PartitionPlan& plan, std::size_t total);

/// Label threshold used by the NonIID scheme: the `q`-quantile of `labels`
/// with linear interpolation between order statistics.
double label_quantile(std::span<const double> labels, double q);

/// Indices into `train` for each of the K shards.
std::vector<std::vector<std::size_t>> partition_indices(const Dataset& train, const PartitionPlan& plan);
std::vector<Dataset> partition(const Dataset& train, const PartitionPlan& plan);

}  // namespace ndcp
