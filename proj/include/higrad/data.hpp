#pragma once

// Data supply for the tree runner: synthetic generators, LibSVM files, and
// the deterministic rule that deals one finite stream across segments.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "higrad/models.hpp"
#include "higrad/rng.hpp"
#include "higrad/tree.hpp"

namespace higrad {

// ---------------------------------------------------------------------------
// Synthetic ground truth.

enum class ThetaStarKind { null_case, dense, sparse };

ThetaStarKind theta_star_kind_from_name(const std::string& name);
std::string theta_star_kind_name(ThetaStarKind kind);

// The three stock signal shapes, all deterministic in (kind, d):
//   null    all zeros;
//   dense   every coordinate 1/sqrt(d), so |theta*| = 1;
//   sparse  first max(1, d/10) coordinates equal, zero elsewhere, |theta*| = 1.
Eigen::VectorXd make_theta_star(ThetaStarKind kind, int d);

// A generating model: features x ~ N(0, I_d) and
//   linear     y = x'theta* + N(0, 1)
//   logistic   y ~ Bernoulli(expit(x'theta*))
// Only those two kinds generate data; huber and ridge fits reuse the linear
// and logistic generators.
struct SyntheticModel {
  ModelKind kind = ModelKind::linear;
  Eigen::VectorXd theta_star;
};

// Draws one observation into (x, y).  x must be sized to theta_star already.
// Consumes exactly d normals plus, for logistic, one uniform.
void gen_datum(const SyntheticModel& model, RandomStream& rng,
               Eigen::VectorXd& x, double& y);

// ---------------------------------------------------------------------------
// LibSVM-format datasets.

struct SparseRow {
  double label = 0.0;
  // (index, value) pairs with 1-based, strictly increasing indices.
  std::vector<std::pair<int, double>> features;
};

struct SparseDataset {
  std::vector<SparseRow> rows;
  int dimension = 0;  // max feature index seen

  long long size() const { return static_cast<long long>(rows.size()); }
};

// Parses LibSVM text: one "label idx:val idx:val ..." row per line, blank
// lines skipped.  Indices must be positive integers and strictly increasing
// within a row; violations raise ParseError naming the line number.  With
// remap_binary_labels, labels +1/-1 become 1/0 (anything else on a remapped
// file is a ParseError); without it labels pass through unchanged.
SparseDataset parse_libsvm(std::istream& in, bool remap_binary_labels = false);
SparseDataset load_libsvm(const std::string& path, bool remap_binary_labels = false);

// Serializes back to LibSVM text; parse_libsvm(format_libsvm(ds)) == ds.
std::string format_libsvm(const SparseDataset& dataset);

// Expands rows into dense storage with at least min_dim columns.
struct DenseDataset {
  Eigen::MatrixXd x;  // one row per observation
  Eigen::VectorXd y;

  int dim() const { return static_cast<int>(x.cols()); }
  long long size() const { return x.rows(); }
};

DenseDataset densify(const SparseDataset& dataset, int min_dim = 0);

// ---------------------------------------------------------------------------
// Dealing one stream across the tree.
//
// A single ordered stream z_1, z_2, ... is assigned to segments so that each
// datum is used exactly once and the assignment depends only on the
// configuration: the root takes the first n_0 data; then, level by level,
// the Pi_k segments of level k take the next Pi_k * n_k data dealt
// round-robin (segment r gets positions prefix_k + r, prefix_k + Pi_k + r,
// ...).  With batching, "one slot" means batch_size consecutive data.

class StreamPartition {
 public:
  // Throws ShardExhausted when the stream holds fewer than needed() data.
  StreamPartition(const TreeConfig& config, long long available,
                  int batch_size = 1);

  long long needed() const { return needed_; }
  int batch_size() const { return batch_; }

  // Zero-based stream position of the (slot, element)-th datum consumed by a
  // segment; slot indexes the segment's updates 0..n_k-1 and element the
  // data within the update's batch.
  long long position(long long segment_id, long long slot,
                     int element = 0) const;

  // Inverse map: which (segment_id, slot) consumes stream position pos.
  std::pair<long long, long long> locate(long long pos) const;

 private:
  TreeConfig config_;
  int batch_ = 1;
  long long needed_ = 0;
  std::vector<long long> level_start_;  // stream offset where level k begins
};

// ---------------------------------------------------------------------------
// Data sources consumed by the runner.

// A shard hands out the data of one segment, in order.
class DatumStream {
 public:
  virtual ~DatumStream() = default;
  // Fills (x, y); returns false when the shard is exhausted.
  virtual bool next(Eigen::VectorXd& x, double& y) = 0;
};

class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual int dim() const = 0;
  // Opens the shard for one segment.  Called once per segment per run; the
  // shard must yield at least n_k * batch_size data.
  virtual std::unique_ptr<DatumStream> open_shard(const TreeConfig& config,
                                                  std::span<const int> segment_path,
                                                  int batch_size) = 0;
  // Optional up-front verification that a run with this configuration can be
  // served (dimension and volume checks).
  virtual void check_run(const TreeConfig& /*config*/, int /*batch_size*/) const {}
};

// Unlimited synthetic data; every segment draws from a private stream keyed
// by (seed, segment path), so results are independent of execution order.
class SyntheticSource final : public DataSource {
 public:
  SyntheticSource(SyntheticModel model, std::uint64_t seed);
  int dim() const override;
  std::unique_ptr<DatumStream> open_shard(const TreeConfig& config,
                                          std::span<const int> segment_path,
                                          int batch_size) override;

 private:
  SyntheticModel model_;
  std::uint64_t seed_;
};

// A finite dataset dealt across segments by StreamPartition; each datum is
// used exactly once.  check_run throws ShardExhausted if the dataset is too
// small and DimensionMismatch if its width exceeds dim().
class PartitionedSource final : public DataSource {
 public:
  PartitionedSource(DenseDataset dataset);
  int dim() const override;
  std::unique_ptr<DatumStream> open_shard(const TreeConfig& config,
                                          std::span<const int> segment_path,
                                          int batch_size) override;
  void check_run(const TreeConfig& config, int batch_size) const override;

 private:
  std::shared_ptr<const DenseDataset> dataset_;
};

// Samples a finite dataset uniformly with replacement, so a total budget
// larger than the dataset behaves like repeated passes in random order.
// Per-segment streams are keyed by (seed, segment path).
class ReplacementSource final : public DataSource {
 public:
  ReplacementSource(DenseDataset dataset, std::uint64_t seed);
  int dim() const override;
  std::unique_ptr<DatumStream> open_shard(const TreeConfig& config,
                                          std::span<const int> segment_path,
                                          int batch_size) override;

 private:
  std::shared_ptr<const DenseDataset> dataset_;
  std::uint64_t seed_;
};

// Stream key shared by the synthetic and replacement sources: hashing the
// segment path (level, then branches) under the run seed.
std::uint64_t segment_stream_key(std::uint64_t seed, std::span<const int> segment_path);

}  // namespace higrad
