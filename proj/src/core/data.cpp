#include "data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "random.hpp"

namespace ndcp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::size_t resolve_label_column(const std::vector<std::string_view>& header, const std::string& label_column,
                                 const std::string& source) {
  if (label_column.empty()) return header.size() - 1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == label_column) return j;
  }
  std::size_t index = 0;
  auto [ptr, ec] = std::from_chars(label_column.data(), label_column.data() + label_column.size(), index);
  if (ec == std::errc{} && ptr == label_column.data() + label_column.size() && index < header.size()) {
    return index;
  }
  throw DataError(source + ": label column '" + label_column + "' not found", 1);
}

}  // namespace

DataError::DataError(const std::string& what, std::size_t row, std::size_t column)
    : std::runtime_error([&] {
        std::string msg = what;
        if (row > 0) msg += " (row " + std::to_string(row);
        if (row > 0 && column > 0) msg += ", column " + std::to_string(column);
        if (row > 0) msg += ")";
        return msg;
      }()),
      row_(row),
      column_(column) {}

Dataset::Dataset(std::size_t feature_count, std::vector<double> features, std::vector<double> labels,
                 std::vector<std::string> feature_names, std::string label_name)
    : feature_count_(feature_count),
      features_(std::move(features)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)),
      label_name_(std::move(label_name)) {
  if (feature_count_ == 0) throw std::invalid_argument("dataset needs at least one feature");
  if (features_.size() != labels_.size() * feature_count_) {
    throw std::invalid_argument("feature buffer size does not match labels x feature_count");
  }
  if (feature_names_.empty()) {
    for (std::size_t j = 0; j < feature_count_; ++j) feature_names_.push_back("x" + std::to_string(j + 1));
  } else if (feature_names_.size() != feature_count_) {
    throw std::invalid_argument("feature name count does not match feature_count");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  std::vector<double> labels;
  features.reserve(indices.size() * feature_count_);
  labels.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw std::out_of_range("subset index out of range");
    auto r = row(i);
    features.insert(features.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  return Dataset(feature_count_, std::move(features), std::move(labels), feature_names_, label_name_);
}

Dataset Dataset::with_labels(std::vector<double> labels) const {
  if (labels.size() != size()) throw std::invalid_argument("label count mismatch");
  return Dataset(feature_count_, features_, std::move(labels), feature_names_, label_name_);
}

Dataset parse_csv(const std::string& text, const std::string& label_column, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> header_storage;
  std::size_t columns = 0;
  std::size_t label_index = 0;
  std::vector<double> features;
  std::vector<double> labels;

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (columns == 0) {
      if (fields.size() < 2) throw DataError(source + ": need at least two columns", row);
      columns = fields.size();
      header_storage.assign(fields.begin(), fields.end());
      label_index = resolve_label_column(fields, label_column, source);
      continue;
    }
    if (fields.size() != columns) {
      throw DataError(source + ": expected " + std::to_string(columns) + " columns, found " +
                          std::to_string(fields.size()),
                      row);
    }
    for (std::size_t j = 0; j < columns; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j], v)) {
        throw DataError(source + ": non-numeric or non-finite cell '" + std::string(fields[j]) + "'", row, j + 1);
      }
      if (j == label_index) {
        labels.push_back(v);
      } else {
        features.push_back(v);
      }
    }
  }
  if (columns == 0) throw DataError(source + ": empty file");
  if (labels.empty()) throw DataError(source + ": no data rows");

  std::vector<std::string> names;
  for (std::size_t j = 0; j < columns; ++j) {
    if (j != label_index) names.push_back(header_storage[j]);
  }
  return Dataset(columns - 1, std::move(features), std::move(labels), std::move(names),
                 header_storage[label_index]);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), label_column, path.string());
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& name : d.feature_names()) out << name << ',';
  out << d.label_name() << '\n';
  char buf[64];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) {
      put(v);
      out << ',';
    }
    put(d.label(i));
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

SplitResult train_test_split_indices(std::size_t size, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  const auto test_size = static_cast<std::size_t>(std::llround(static_cast<double>(size) * test_fraction));
  if (test_size == 0 || test_size >= size) {
    throw std::invalid_argument("test_fraction " + std::to_string(test_fraction) + " leaves an empty side for " +
                                std::to_string(size) + " examples");
  }
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span(order), rng);
  SplitResult out;
  out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test_size), order.end());
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  auto split = train_test_split_indices(d.size(), test_fraction, seed);
  return {d.subset(split.train), d.subset(split.test)};
}

std::string to_string(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::Equal:
      return "equal";
    case PartitionScheme::Unequal:
      return "unequal";
    case PartitionScheme::NonIID:
      return "noniid";
  }
  return "?";
}

PartitionScheme partition_scheme_from_string(const std::string& s) {
  std::string lower;
  for (char c : s) {
    if (c != '-' && c != '_') lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (lower == "equal") return PartitionScheme::Equal;
  if (lower == "unequal") return PartitionScheme::Unequal;
  if (lower == "noniid") return PartitionScheme::NonIID;
  throw std::invalid_argument("unknown partition scheme '" + s + "'");
}

void PartitionPlan::validate() const {
  if (source_count < 2) throw std::invalid_argument("partition needs K >= 2 sources");
  if (!(non_iid_quantile > 0.0 && non_iid_quantile < 1.0)) {
    throw std::invalid_argument("non_iid_quantile must lie strictly between 0 and 1");
  }
  if (!(non_iid_boost >= 1.0)) throw std::invalid_argument("non_iid_boost must be >= 1");
  if (!(unequal_ratio >= 1.0)) throw std::invalid_argument("unequal_ratio must be >= 1");
}

std::vector<std::size_t> shard_sizes(const PartitionPlan& plan, std::size_t total) {
  plan.validate();
  const std::size_t k = plan.source_count;
  if (total < 2 * k) {
    throw std::invalid_argument("partition needs at least 2K = " + std::to_string(2 * k) + " examples, got " +
                                std::to_string(total));
  }
  std::vector<std::size_t> sizes(k);
  if (plan.scheme == PartitionScheme::Unequal) {
    const double weight_sum = plan.unequal_ratio + static_cast<double>(k - 1);
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double w = j == 0 ? plan.unequal_ratio : 1.0;
      sizes[j] = static_cast<std::size_t>(std::floor(static_cast<double>(total) * w / weight_sum));
      assigned += sizes[j];
    }
    for (std::size_t j = 0; assigned < total; j = (j + 1) % k, ++assigned) ++sizes[j];
  } else {
    const std::size_t base = total / k;
    const std::size_t extra = total % k;
    for (std::size_t j = 0; j < k; ++j) sizes[j] = base + (j >= k - extra ? 1 : 0);
  }
  return sizes;
}

double label_quantile(std::span<const double> labels, double q) {
  if (labels.empty()) throw std::invalid_argument("quantile of empty label set");
  std::vector<double> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::vector<std::size_t>> partition_indices(const Dataset& train, const PartitionPlan& plan) {
  const auto sizes = shard_sizes(plan, train.size());
  const std::size_t k = sizes.size();
  Rng rng(plan.seed);
  std::vector<std::vector<std::size_t>> shards(k);

  if (plan.scheme != PartitionScheme::NonIID) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span(order), rng);
    auto it = order.begin();
    for (std::size_t j = 0; j < k; ++j) {
      shards[j].assign(it, it + static_cast<std::ptrdiff_t>(sizes[j]));
      it += static_cast<std::ptrdiff_t>(sizes[j]);
    }
    return shards;
  }

  // NonIID: shard 1 receives boost x the global share of labels above the
  // quantile threshold; the rest of the high labels are spread evenly.
  const double threshold = label_quantile(train.labels(), plan.non_iid_quantile);
  std::vector<std::size_t> high;
  std::vector<std::size_t> low;
  for (std::size_t i = 0; i < train.size(); ++i) (train.label(i) > threshold ? high : low).push_back(i);
  shuffle(std::span(high), rng);
  shuffle(std::span(low), rng);

  const std::size_t n_high = high.size();
  const double share = static_cast<double>(n_high) / static_cast<double>(train.size());
  std::vector<std::size_t> high_counts(k, 0);
  {
    auto boosted = static_cast<std::size_t>(std::llround(plan.non_iid_boost * share * static_cast<double>(sizes[0])));
    const std::size_t fair = (n_high + k - 1) / k;
    std::size_t h1 = std::max(boosted, fair);
    h1 = std::min({h1, n_high, sizes[0]});
    // Shard 1 cannot take fewer highs than its size minus all available lows.
    h1 = std::max(h1, sizes[0] > low.size() ? sizes[0] - low.size() : std::size_t{0});
    high_counts[0] = h1;
  }
  std::size_t remaining = n_high - high_counts[0];
  // Even spread over shards 2..K, capped by capacity; leftovers go round-robin.
  while (remaining > 0) {
    std::size_t open = 0;
    for (std::size_t j = 1; j < k; ++j) open += high_counts[j] < sizes[j] ? 1 : 0;
    if (open == 0) break;
    const std::size_t each = std::max<std::size_t>(remaining / open, 1);
    for (std::size_t j = 1; j < k && remaining > 0; ++j) {
      const std::size_t take = std::min({each, sizes[j] - high_counts[j], remaining});
      high_counts[j] += take;
      remaining -= take;
    }
  }
  if (remaining > 0) high_counts[0] += remaining;  // only when shards 2..K are saturated

  auto hi_it = high.begin();
  auto lo_it = low.begin();
  for (std::size_t j = 0; j < k; ++j) {
    shards[j].insert(shards[j].end(), hi_it, hi_it + static_cast<std::ptrdiff_t>(high_counts[j]));
    hi_it += static_cast<std::ptrdiff_t>(high_counts[j]);
    const std::size_t lows = sizes[j] - high_counts[j];
    shards[j].insert(shards[j].end(), lo_it, lo_it + static_cast<std::ptrdiff_t>(lows));
    lo_it += static_cast<std::ptrdiff_t>(lows);
    shuffle(std::span(shards[j]), rng);
  }
  return shards;
}

std::vector<Dataset> partition(const Dataset& train, const PartitionPlan& plan) {
  std::vector<Dataset> out;
  for (const auto& idx : partition_indices(train, plan)) out.push_back(train.subset(idx));
  return out;
}

}  // namespace ndcp
