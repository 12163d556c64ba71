#pragma once

#include "fedclip/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedclip {

/// Labelled samples. `ids` are stable per-sample identities assigned at
/// generation/load time and preserved through subsetting.
struct Dataset {
  Matrix inputs;  // n × d_in
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::string name;
  std::vector<std::int64_t> ids;

  std::size_t size() const { return labels.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
};

/// Throws DataError if the dataset violates its invariants.
void validate(const Dataset& data);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

struct BlobSpec {
  int num_classes = 3;
  int per_class = 100;
  int input_dim = 16;
  double separation = 4.0;
  std::uint64_t seed = 0;
  /// Seed for the sample noise. Defaults to `seed`. Class centres depend on
  /// `seed` only, so a different sample seed draws fresh points from the
  /// same distribution.
  std::optional<std::uint64_t> sample_seed;
  /// Length of a seeded offset added to every sample (domain shift).
  double shift = 0.0;
};

/// Class c ~ N(separation·u_c, I) with u_c a seeded unit direction. Rows are
/// grouped by class.
Dataset generate_blobs(const BlobSpec& spec);
Dataset generate_blobs(int num_classes, int per_class, int input_dim, double separation,
                       std::uint64_t seed);

/// Reads `label,f0,f1,...`. Integer labels are used as class indices;
/// otherwise class names are mapped to indices by first appearance. When
/// `class_names` is given, labels must name (or index) one of them.
Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::vector<std::string>>& class_names = std::nullopt);

/// Writes integer labels and 17-significant-digit features.
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct ClientPartition {
  Dataset train;
  Dataset val;
  Dataset test;
};

struct FederatedSplit {
  std::vector<ClientPartition> clients;
  std::uint64_t seed = 0;
  std::string source_name;
};

/// Shuffles, deals equal shares to `num_clients` (remainder to the first
/// clients), then splits each share 60/20/20 into train/val/test with val
/// and test rounded down.
FederatedSplit federated_partition(const Dataset& source, int num_clients, std::uint64_t seed);

/// Seeded holdout split: the last floor(test_fraction·n) shuffled rows are
/// the test part.
std::pair<Dataset, Dataset> train_test_split(const Dataset& source, double test_fraction,
                                             std::uint64_t seed);

}  // namespace fedclip
