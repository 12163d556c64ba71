#include "fedclip/data.hpp"

#include "fedclip/errors.hpp"
#include "fedclip/seeding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace fedclip {

void validate(const Dataset& data) {
  const auto n = static_cast<Eigen::Index>(data.labels.size());
  if (n < 1) throw DataError("dataset '" + data.name + "' is empty");
  if (data.inputs.rows() != n) {
    throw DataError("dataset '" + data.name + "': " + std::to_string(data.inputs.rows()) +
                    " input rows for " + std::to_string(n) + " labels");
  }
  if (data.ids.size() != data.labels.size()) throw DataError("dataset '" + data.name + "': id count mismatch");
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0 || data.labels[i] >= data.num_classes()) {
      throw DataError("dataset '" + data.name + "': label out of range at row " + std::to_string(i));
    }
  }
  if (!data.inputs.allFinite()) throw DataError("dataset '" + data.name + "' has non-finite inputs");
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.class_names = data.class_names;
  out.name = data.name;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= data.size()) throw ContractError("subset: row " + std::to_string(r) + " out of range");
    out.inputs.row(static_cast<Eigen::Index>(i)) = data.inputs.row(static_cast<Eigen::Index>(r));
    out.labels.push_back(data.labels[r]);
    out.ids.push_back(data.ids[r]);
  }
  return out;
}

namespace {

RowVector random_unit(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowVector v(dim);
  do {
    for (int d = 0; d < dim; ++d) v(d) = normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

}  // namespace

Dataset generate_blobs(const BlobSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("generate_blobs: need at least two classes");
  if (spec.per_class < 1) throw ConfigError("generate_blobs: per_class must be positive");
  if (spec.input_dim < 1) throw ConfigError("generate_blobs: input_dim must be positive");
  if (!(spec.separation >= 0.0)) throw ConfigError("generate_blobs: separation must be >= 0");

  Rng center_rng(derive_seed(spec.seed, "blob-centers"));
  std::vector<RowVector> centers;
  for (int c = 0; c < spec.num_classes; ++c) {
    centers.push_back(spec.separation * random_unit(spec.input_dim, center_rng));
  }
  RowVector offset = RowVector::Zero(spec.input_dim);
  if (spec.shift != 0.0) {
    Rng shift_rng(derive_seed(spec.seed, "blob-shift"));
    offset = spec.shift * random_unit(spec.input_dim, shift_rng);
  }

  Rng noise_rng(derive_seed(spec.sample_seed.value_or(spec.seed), "blob-samples"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = spec.num_classes * spec.per_class;
  Dataset out;
  out.name = "blobs";
  out.inputs.resize(n, spec.input_dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    out.class_names.push_back("class_" + std::to_string(c));
    for (int i = 0; i < spec.per_class; ++i) {
      const int row = c * spec.per_class + i;
      for (int d = 0; d < spec.input_dim; ++d) out.inputs(row, d) = normal(noise_rng);
      out.inputs.row(row) += centers[static_cast<std::size_t>(c)] + offset;
      out.labels.push_back(c);
      out.ids.push_back(row);
    }
  }
  return out;
}

Dataset generate_blobs(int num_classes, int per_class, int input_dim, double separation,
                       std::uint64_t seed) {
  BlobSpec spec;
  spec.num_classes = num_classes;
  spec.per_class = per_class;
  spec.input_dim = input_dim;
  spec.separation = separation;
  spec.seed = seed;
  return generate_blobs(spec);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& text) {
  long long v = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string parse_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  return path.string() + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::vector<std::string>>& class_names) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open file");

  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto header = split_fields(line);
    if (header.size() < 2 || header[0] != "label") {
      throw ParseError(parse_error(path, line_no, "header must be label,f0,f1,..."));
    }
    width = header.size() - 1;
    break;
  }
  if (width == 0) throw ParseError(parse_error(path, line_no, "missing header"));

  std::vector<std::string> raw_labels;
  std::vector<std::size_t> label_lines;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != width + 1) {
      throw ParseError(parse_error(path, line_no, "expected " + std::to_string(width + 1) +
                                                      " fields, found " + std::to_string(fields.size())));
    }
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const auto v = parse_double(fields[f]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(parse_error(path, line_no, "non-numeric feature '" + fields[f] + "'"));
      }
      values.push_back(*v);
    }
    raw_labels.push_back(fields[0]);
    label_lines.push_back(line_no);
  }
  if (raw_labels.empty()) throw ParseError(path.string() + ": no data rows");

  Dataset out;
  out.name = path.stem().string();
  const bool integer_labels = std::all_of(raw_labels.begin(), raw_labels.end(),
                                          [](const std::string& s) { return parse_int(s).has_value(); });
  if (integer_labels) {
    long long max_label = -1;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      const long long v = *parse_int(raw_labels[i]);
      const long long limit = class_names ? static_cast<long long>(class_names->size()) : (1LL << 30);
      if (v < 0 || v >= limit) {
        throw ParseError(parse_error(path, label_lines[i], "unknown label '" + raw_labels[i] + "'"));
      }
      max_label = std::max(max_label, v);
      out.labels.push_back(static_cast<int>(v));
    }
    if (class_names) {
      out.class_names = *class_names;
    } else {
      for (long long c = 0; c <= max_label; ++c) out.class_names.push_back(std::to_string(c));
    }
  } else {
    std::map<std::string, int> index;
    if (class_names) {
      out.class_names = *class_names;
      for (std::size_t c = 0; c < class_names->size(); ++c) index.emplace((*class_names)[c], static_cast<int>(c));
    }
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
      auto it = index.find(raw_labels[i]);
      if (it == index.end()) {
        if (class_names) {
          throw ParseError(parse_error(path, label_lines[i], "unknown label '" + raw_labels[i] + "'"));
        }
        it = index.emplace(raw_labels[i], static_cast<int>(out.class_names.size())).first;
        out.class_names.push_back(raw_labels[i]);
      }
      out.labels.push_back(it->second);
    }
  }

  const auto n = static_cast<Eigen::Index>(raw_labels.size());
  out.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(width));
  out.ids.resize(raw_labels.size());
  std::iota(out.ids.begin(), out.ids.end(), 0);
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "label";
  for (int d = 0; d < data.input_dim(); ++d) out << ",f" << d;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (int d = 0; d < data.input_dim(); ++d) out << ',' << data.inputs(static_cast<Eigen::Index>(i), d);
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

FederatedSplit federated_partition(const Dataset& source, int num_clients, std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("federated_partition: num_clients must be >= 1");
  if (source.size() < 5 * static_cast<std::size_t>(num_clients)) {
    throw ConfigError("federated_partition: " + std::to_string(source.size()) + " samples cannot feed " +
                      std::to_string(num_clients) + " clients (need at least 5 per client)");
  }

  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "partition-clients"));
  std::shuffle(order.begin(), order.end(), rng);

  FederatedSplit split;
  split.seed = seed;
  split.source_name = source.name;
  const std::size_t m = static_cast<std::size_t>(num_clients);
  const std::size_t base = source.size() / m;
  const std::size_t extra = source.size() % m;
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t share = base + (c < extra ? 1 : 0);
    std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                  order.begin() + static_cast<std::ptrdiff_t>(cursor + share));
    cursor += share;
    Rng client_rng(derive_seed(seed, static_cast<std::uint64_t>(c), 0xC11E47));
    std::shuffle(rows.begin(), rows.end(), client_rng);

    const std::size_t n_val = share / 5;
    const std::size_t n_test = share / 5;
    const std::size_t n_train = share - n_val - n_test;
    const std::span<const std::size_t> all(rows);
    ClientPartition part;
    part.train = subset(source, all.subspan(0, n_train));
    part.val = subset(source, all.subspan(n_train, n_val));
    part.test = subset(source, all.subspan(n_train + n_val, n_test));
    const std::string tag = source.name + "/client" + std::to_string(c);
    part.train.name = tag + "/train";
    part.val.name = tag + "/val";
    part.test.name = tag + "/test";
    split.clients.push_back(std::move(part));
  }
  return split;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& source, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("train_test_split: test_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "holdout"));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(source.size()));
  if (n_test == 0 || n_test == source.size()) {
    throw ConfigError("train_test_split: split leaves an empty part");
  }
  const std::span<const std::size_t> all(order);
  Dataset train = subset(source, all.subspan(0, source.size() - n_test));
  Dataset test = subset(source, all.subspan(source.size() - n_test));
  train.name = source.name + "/train";
  test.name = source.name + "/test";
  return {std::move(train), std::move(test)};
}

}  // namespace fedclip
