#include "higrad/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "higrad/errors.hpp"
#include "higrad/special_functions.hpp"

namespace higrad {

// ---------------------------------------------------------------------------
// Synthetic ground truth.

ThetaStarKind theta_star_kind_from_name(const std::string& name) {
  if (name == "null") return ThetaStarKind::null_case;
  if (name == "dense") return ThetaStarKind::dense;
  if (name == "sparse") return ThetaStarKind::sparse;
  throw DomainError("unknown signal shape '" + name + "'");
}

std::string theta_star_kind_name(ThetaStarKind kind) {
  switch (kind) {
    case ThetaStarKind::null_case: return "null";
    case ThetaStarKind::dense: return "dense";
    case ThetaStarKind::sparse: return "sparse";
  }
  throw DomainError("unknown signal shape");
}

Eigen::VectorXd make_theta_star(ThetaStarKind kind, int d) {
  if (d < 1) throw BadDimension("dimension must be >= 1, got " + std::to_string(d));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  switch (kind) {
    case ThetaStarKind::null_case:
      break;
    case ThetaStarKind::dense:
      theta.setConstant(1.0 / std::sqrt(static_cast<double>(d)));
      break;
    case ThetaStarKind::sparse: {
      const int support = std::max(1, d / 10);
      const double value = 1.0 / std::sqrt(static_cast<double>(support));
      theta.head(support).setConstant(value);
      break;
    }
  }
  return theta;
}

void gen_datum(const SyntheticModel& model, RandomStream& rng,
               Eigen::VectorXd& x, double& y) {
  const int d = static_cast<int>(model.theta_star.size());
  if (x.size() != d) {
    throw DimensionMismatch("x of size " + std::to_string(x.size()) +
                            " for a model of dimension " + std::to_string(d));
  }
  for (int i = 0; i < d; ++i) x[i] = rng.normal();
  const double signal = x.dot(model.theta_star);
  switch (model.kind) {
    case ModelKind::linear:
      y = signal + rng.normal();
      break;
    case ModelKind::logistic:
      y = rng.uniform() < special::expit(signal) ? 1.0 : 0.0;
      break;
    default:
      throw DomainError("only linear and logistic models generate data");
  }
}

// ---------------------------------------------------------------------------
// LibSVM parsing.

SparseDataset parse_libsvm(std::istream& in, bool remap_binary_labels) {
  SparseDataset dataset;
  std::string line;
  long long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    // Strip a trailing comment and surrounding whitespace.
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;  // blank line

    SparseRow row;
    const std::string where = "line " + std::to_string(line_number);
    try {
      std::size_t used = 0;
      row.label = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad label '" + token + "'");
    }
    if (remap_binary_labels) {
      if (row.label == 1.0) {
        row.label = 1.0;
      } else if (row.label == -1.0) {
        row.label = 0.0;
      } else {
        throw ParseError(where + ": label " + std::to_string(row.label) +
                         " is not +1/-1, cannot remap to {0,1}");
      }
    }

    int last_index = 0;
    while (fields >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 >= token.size()) {
        throw ParseError(where + ": bad feature token '" + token + "'");
      }
      int index = 0;
      double value = 0.0;
      try {
        std::size_t used = 0;
        index = std::stoi(token.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(token);
        used = 0;
        const std::string value_text = token.substr(colon + 1);
        value = std::stod(value_text, &used);
        if (used != value_text.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError(where + ": bad feature token '" + token + "'");
      }
      if (index < 1) {
        throw ParseError(where + ": feature index " + std::to_string(index) +
                         " must be >= 1");
      }
      if (index <= last_index) {
        throw ParseError(where + ": feature index " + std::to_string(index) +
                         " not strictly increasing after " +
                         std::to_string(last_index));
      }
      last_index = index;
      row.features.emplace_back(index, value);
      dataset.dimension = std::max(dataset.dimension, index);
    }
    dataset.rows.push_back(std::move(row));
  }
  return dataset;
}

SparseDataset load_libsvm(const std::string& path, bool remap_binary_labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_libsvm(in, remap_binary_labels);
}

std::string format_libsvm(const SparseDataset& dataset) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& row : dataset.rows) {
    out << row.label;
    for (const auto& [index, value] : row.features) {
      out << ' ' << index << ':' << value;
    }
    out << '\n';
  }
  return out.str();
}

DenseDataset densify(const SparseDataset& dataset, int min_dim) {
  const int d = std::max(dataset.dimension, min_dim);
  if (d < 1) throw BadDimension("dataset has no features");
  DenseDataset dense;
  dense.x = Eigen::MatrixXd::Zero(dataset.size(), d);
  dense.y.resize(dataset.size());
  for (long long i = 0; i < dataset.size(); ++i) {
    const auto& row = dataset.rows[i];
    dense.y[i] = row.label;
    for (const auto& [index, value] : row.features) {
      dense.x(i, index - 1) = value;
    }
  }
  return dense;
}

// ---------------------------------------------------------------------------
// Stream partition.

StreamPartition::StreamPartition(const TreeConfig& config, long long available,
                                 int batch_size)
    : config_(config), batch_(batch_size) {
  if (batch_size < 1) {
    throw BadLength("batch size must be >= 1, got " + std::to_string(batch_size));
  }
  level_start_.assign(config.depth + 1, 0);
  long long offset = 0;
  for (int k = 0; k <= config.depth; ++k) {
    level_start_[k] = offset;
    offset += config.level_counts[k] * config.segment_lengths[k] *
              static_cast<long long>(batch_);
  }
  needed_ = offset;
  if (available < needed_) {
    throw ShardExhausted("stream of " + std::to_string(available) +
                         " data cannot serve " + std::to_string(needed_) +
                         " slots");
  }
}

long long StreamPartition::position(long long segment_id, long long slot,
                                    int element) const {
  const int level = config_.segment_level(segment_id);
  const long long rank = segment_id - config_.level_offsets[level];
  if (slot < 0 || slot >= config_.segment_lengths[level]) {
    throw BadLength("slot " + std::to_string(slot) + " outside segment of " +
                    std::to_string(config_.segment_lengths[level]) + " updates");
  }
  if (element < 0 || element >= batch_) {
    throw BadLength("batch element " + std::to_string(element) +
                    " outside batch of " + std::to_string(batch_));
  }
  // Level k deals whole batches round-robin across its Pi_k segments.
  return level_start_[level] +
         (slot * config_.level_counts[level] + rank) * batch_ + element;
}

std::pair<long long, long long> StreamPartition::locate(long long pos) const {
  if (pos < 0 || pos >= needed_) {
    throw BadLength("stream position " + std::to_string(pos) + " outside 0.." +
                    std::to_string(needed_ - 1));
  }
  int level = config_.depth;
  for (int k = 0; k < config_.depth; ++k) {
    if (pos < level_start_[k + 1]) {
      level = k;
      break;
    }
  }
  const long long batch_index = (pos - level_start_[level]) / batch_;
  const long long slot = batch_index / config_.level_counts[level];
  const long long rank = batch_index % config_.level_counts[level];
  return {config_.level_offsets[level] + rank, slot};
}

// ---------------------------------------------------------------------------
// Sources.

std::uint64_t segment_stream_key(std::uint64_t seed,
                                 std::span<const int> segment_path) {
  std::vector<long long> path(segment_path.begin(), segment_path.end());
  return derive_stream_key(seed, stream_tag::segment_data, path);
}

namespace {

class SyntheticStream final : public DatumStream {
 public:
  SyntheticStream(SyntheticModel model, std::uint64_t key)
      : model_(std::move(model)), rng_(key) {}

  bool next(Eigen::VectorXd& x, double& y) override {
    gen_datum(model_, rng_, x, y);
    return true;
  }

 private:
  SyntheticModel model_;  // held by value so shards may outlive the source
  RandomStream rng_;
};

class PartitionedStream final : public DatumStream {
 public:
  PartitionedStream(std::shared_ptr<const DenseDataset> dataset,
                    StreamPartition partition, long long segment_id)
      : dataset_(std::move(dataset)),
        partition_(std::move(partition)),
        segment_id_(segment_id) {}

  bool next(Eigen::VectorXd& x, double& y) override {
    const long long slot = served_ / partition_.batch_size();
    const int element = static_cast<int>(served_ % partition_.batch_size());
    const long long pos = partition_.position(segment_id_, slot, element);
    x = dataset_->x.row(pos);
    y = dataset_->y[pos];
    ++served_;
    return true;
  }

 private:
  std::shared_ptr<const DenseDataset> dataset_;
  StreamPartition partition_;
  long long segment_id_;
  long long served_ = 0;
};

class ReplacementStream final : public DatumStream {
 public:
  ReplacementStream(std::shared_ptr<const DenseDataset> dataset, std::uint64_t key)
      : dataset_(std::move(dataset)), rng_(key) {}

  bool next(Eigen::VectorXd& x, double& y) override {
    const auto i = static_cast<long long>(
        rng_.uniform_index(static_cast<std::uint64_t>(dataset_->size())));
    x = dataset_->x.row(i);
    y = dataset_->y[i];
    return true;
  }

 private:
  std::shared_ptr<const DenseDataset> dataset_;
  RandomStream rng_;
};

}  // namespace

SyntheticSource::SyntheticSource(SyntheticModel model, std::uint64_t seed)
    : model_(std::move(model)), seed_(seed) {}

int SyntheticSource::dim() const {
  return static_cast<int>(model_.theta_star.size());
}

std::unique_ptr<DatumStream> SyntheticSource::open_shard(
    const TreeConfig& config, std::span<const int> segment_path, int batch_size) {
  (void)config;
  (void)batch_size;
  return std::make_unique<SyntheticStream>(model_,
                                           segment_stream_key(seed_, segment_path));
}

PartitionedSource::PartitionedSource(DenseDataset dataset)
    : dataset_(std::make_shared<const DenseDataset>(std::move(dataset))) {}

int PartitionedSource::dim() const { return dataset_->dim(); }

void PartitionedSource::check_run(const TreeConfig& config, int batch_size) const {
  // Constructor throws ShardExhausted when the dataset is too small.
  StreamPartition partition(config, dataset_->size(), batch_size);
  (void)partition;
}

std::unique_ptr<DatumStream> PartitionedSource::open_shard(
    const TreeConfig& config, std::span<const int> segment_path, int batch_size) {
  StreamPartition partition(config, dataset_->size(), batch_size);
  const long long id = config.segment_id(segment_path);
  return std::make_unique<PartitionedStream>(dataset_, std::move(partition), id);
}

ReplacementSource::ReplacementSource(DenseDataset dataset, std::uint64_t seed)
    : dataset_(std::make_shared<const DenseDataset>(std::move(dataset))),
      seed_(seed) {
  if (dataset_->size() < 1) throw ShardExhausted("empty dataset");
}

int ReplacementSource::dim() const { return dataset_->dim(); }

std::unique_ptr<DatumStream> ReplacementSource::open_shard(
    const TreeConfig& config, std::span<const int> segment_path, int batch_size) {
  (void)config;
  (void)batch_size;
  return std::make_unique<ReplacementStream>(dataset_,
                                             segment_stream_key(seed_, segment_path));
}

}  // namespace higrad
