#include "metafl/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "metafl/error.hpp"
#include "metafl/rng.hpp"

namespace metafl {
namespace {

constexpr std::uint64_t kNoiseTag = 0x6E6F697365ULL;

std::vector<std::vector<double>> draw_centroids(std::size_t num_classes, std::size_t dim,
                                                Rng& rng) {
  std::vector<std::vector<double>> centroids(num_classes, std::vector<double>(dim));
  auto separated = [&] {
    for (std::size_t a = 0; a < num_classes; ++a) {
      for (std::size_t b = a + 1; b < num_classes; ++b) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
          const double diff = centroids[a][i] - centroids[b][i];
          d2 += diff * diff;
        }
        if (d2 < 1.0) return false;
      }
    }
    return true;
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (auto& c : centroids) {
      for (double& x : c) x = rng.normal();
    }
    if (separated()) return centroids;
  }
  // Low dimension with many classes: lay the centroids out on a line.
  for (std::size_t a = 0; a < num_classes; ++a) {
    std::fill(centroids[a].begin(), centroids[a].end(), 0.0);
    centroids[a][0] = static_cast<double>(a);
  }
  return centroids;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

}  // namespace

void PartitionConfig::validate() const {
  if (num_clients < 1) throw InvalidArgument("num_clients must be >= 1");
  if (!(dirichlet_beta > 0.0) || !std::isfinite(dirichlet_beta)) {
    throw InvalidArgument("dirichlet_beta must be positive");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("val_fraction must be in (0, 1)");
  }
  if (!(label_noise_rate >= 0.0 && label_noise_rate < 1.0)) {
    throw InvalidArgument("label_noise_rate must be in [0, 1)");
  }
  for (std::size_t k : noise_clients) {
    if (k >= num_clients) {
      throw InvalidArgument("noise client index " + std::to_string(k) + " >= num_clients");
    }
  }
}

ClientDataset make_blobs(std::size_t num_classes, std::size_t dim, std::size_t n,
                         double spread, std::uint64_t seed) {
  if (num_classes < 2) throw InvalidArgument("make_blobs: need at least 2 classes");
  if (dim < 1) throw InvalidArgument("make_blobs: dim must be >= 1");
  if (n < num_classes) throw InvalidArgument("make_blobs: n must be >= num_classes");
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw InvalidArgument("make_blobs: spread must be positive");
  }
  Rng rng(seed);
  const auto centroids = draw_centroids(num_classes, dim, rng);

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % num_classes);
  rng.shuffle(labels);

  std::vector<double> features(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = centroids[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < dim; ++j) features[i * dim + j] = c[j] + spread * rng.normal();
  }
  return ClientDataset(dim, num_classes, std::move(features), std::move(labels));
}

std::pair<ClientDataset, ClientDataset> holdout_split(const ClientDataset& data,
                                                      double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("holdout fraction must be in (0, 1)");
  }
  const std::size_t n = data.size();
  if (n < 2) throw InvalidArgument("holdout_split: need at least 2 samples");
  auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  held = std::clamp<std::size_t>(held, 1, n - 1);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<std::size_t> out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> keep(idx.begin() + static_cast<std::ptrdiff_t>(held), idx.end());
  std::sort(out.begin(), out.end());
  std::sort(keep.begin(), keep.end());
  return {data.subset(keep), data.subset(out)};
}

std::vector<ClientSplit> partition_dirichlet(const ClientDataset& data,
                                             const PartitionConfig& cfg) {
  cfg.validate();
  const std::size_t k_clients = cfg.num_clients;
  if (data.size() < 2 * k_clients) {
    throw InvalidArgument("partition infeasible: " + std::to_string(data.size()) +
                          " samples for " + std::to_string(k_clients) +
                          " clients (each needs a train and a val sample)");
  }

  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  }

  Rng rng(cfg.seed);
  std::vector<std::vector<std::size_t>> assigned;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxPartitionAttempts && !ok; ++attempt) {
    assigned.assign(k_clients, {});
    for (const auto& members : by_class) {
      if (members.empty()) continue;
      std::vector<std::size_t> idx = members;
      rng.shuffle(idx);
      const auto p = rng.dirichlet(cfg.dirichlet_beta, k_clients);
      const double n_c = static_cast<double>(idx.size());
      double cumulative = 0.0;
      std::size_t start = 0;
      for (std::size_t k = 0; k < k_clients; ++k) {
        cumulative += p[k];
        std::size_t stop = k + 1 == k_clients
                               ? idx.size()
                               : static_cast<std::size_t>(std::llround(cumulative * n_c));
        stop = std::clamp(stop, start, idx.size());
        assigned[k].insert(assigned[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(stop));
        start = stop;
      }
    }
    ok = std::all_of(assigned.begin(), assigned.end(),
                     [](const auto& a) { return a.size() >= 2; });
  }
  if (!ok) {
    throw InvalidArgument("partition_dirichlet: a client stayed (nearly) empty after " +
                          std::to_string(kMaxPartitionAttempts) + " attempts");
  }

  std::vector<ClientSplit> clients;
  clients.reserve(k_clients);
  for (auto& members : assigned) {
    std::sort(members.begin(), members.end());
    rng.shuffle(members);
    const std::size_t n_k = members.size();
    auto n_val = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(n_k)));
    n_val = std::clamp<std::size_t>(n_val, 1, n_k - 1);
    std::vector<std::size_t> val(members.begin(),
                                 members.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(members.begin() + static_cast<std::ptrdiff_t>(n_val),
                                   members.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    clients.push_back({data.subset(train), data.subset(val)});
  }
  return clients;
}

ClientDataset inject_label_noise(const ClientDataset& data, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("noise rate must be in [0, 1)");
  const std::size_t n = data.size();
  const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  if (flips == 0) return data;

  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `flips` slots are a uniform sample.
  for (std::size_t i = 0; i < flips; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> labels = data.labels();
  const auto classes = data.num_classes();
  for (std::size_t i = 0; i < flips; ++i) {
    const auto old = static_cast<std::size_t>(labels[idx[i]]);
    labels[idx[i]] = static_cast<int>((old + 1 + rng.below(classes - 1)) % classes);
  }
  return data.with_labels(std::move(labels));
}

void apply_partition_noise(std::vector<ClientSplit>& clients, const PartitionConfig& cfg) {
  cfg.validate();
  if (clients.size() != cfg.num_clients) {
    throw InvalidArgument("apply_partition_noise: client count mismatch");
  }
  if (cfg.label_noise_rate == 0.0) return;
  for (std::size_t k : cfg.noise_clients) {
    auto& split = clients[k];
    split.train = inject_label_noise(split.train, cfg.label_noise_rate,
                                     derive_seed(cfg.seed, kNoiseTag, k, 0));
    split.val = inject_label_noise(split.val, cfg.label_noise_rate,
                                   derive_seed(cfg.seed, kNoiseTag, k, 1));
  }
}

ClientDataset load_csv(const std::filesystem::path& path, std::size_t num_classes,
                       bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");

  std::vector<double> features;
  std::vector<int> labels;
  std::size_t columns = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (has_header && line_no == 1) continue;
    if (trim(line).empty()) continue;

    const auto cells = split_commas(line);
    const std::string where = "row " + std::to_string(line_no);
    if (columns == 0) {
      if (cells.size() < 2) throw DataError(where + ": need at least one feature and a label");
      columns = cells.size();
    } else if (cells.size() != columns) {
      throw DataError(where + ": expected " + std::to_string(columns) + " columns, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
      double value = 0.0;
      const auto cell = cells[c];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw DataError(where + ", column " + std::to_string(c + 1) + ": non-numeric cell '" +
                        std::string(cell) + "'");
      }
      if (!std::isfinite(value)) {
        throw DataError(where + ", column " + std::to_string(c + 1) + ": non-finite value");
      }
      features.push_back(value);
    }
    const auto cell = cells.back();
    int label = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
      throw DataError(where + ": label '" + std::string(cell) + "' is not an integer");
    }
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw DataError(where + ": label " + std::to_string(label) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw DataError("CSV file '" + path.string() + "' has no data rows");
  return ClientDataset(columns - 1, num_classes, std::move(features), std::move(labels));
}

void write_csv(const std::filesystem::path& path, const ClientDataset& data, bool with_header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file '" + path.string() + "'");
  if (with_header) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
    out << "label\n";
  }
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << data.label(i) << '\n';
  }
}

std::vector<double> label_distribution(const ClientDataset& data, std::size_t num_classes) {
  std::vector<double> p(num_classes, 0.0);
  for (int y : data.labels()) {
    if (static_cast<std::size_t>(y) >= num_classes) {
      throw InvalidArgument("label_distribution: label outside num_classes");
    }
    p[static_cast<std::size_t>(y)] += 1.0;
  }
  for (double& x : p) x /= static_cast<double>(data.size());
  return p;
}

}  // namespace metafl
