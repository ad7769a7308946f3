#include "metafl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "metafl/error.hpp"

namespace metafl {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value, const char* want) {
  throw ConfigError(key + ": invalid value '" + std::string(value) + "' (expected " + want + ")");
}

std::uint64_t parse_u64(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

std::size_t parse_size(const std::string& key, std::string_view v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::optional<double> parse_optional(const std::string& key, std::string_view v) {
  if (v == "auto") return std::nullopt;
  return parse_double(key, v);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, std::string_view v, Parse parse) {
  std::vector<T> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string_view::npos ? v.npos
                                                                           : comma - start));
    out.push_back(parse(key, item));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

template <typename T, typename Format>
std::string join(const std::vector<T>& xs, Format format) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format(xs[i]);
  }
  return out;
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : "auto";
}

struct Key {
  bool required;
  std::function<void(ExperimentConfig&, const std::string&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define METAFL_SIZE_KEY(name, field, req)                                                    \
  {name, Key{req,                                                                           \
             [](ExperimentConfig& c, const std::string& k, std::string_view v) {            \
               c.field = parse_size(k, v);                                                  \
             },                                                                             \
             [](const ExperimentConfig& c) { return std::to_string(c.field); }}}

#define METAFL_DOUBLE_KEY(name, field)                                                       \
  {name, Key{false,                                                                         \
             [](ExperimentConfig& c, const std::string& k, std::string_view v) {            \
               c.field = parse_double(k, v);                                                \
             },                                                                             \
             [](const ExperimentConfig& c) { return format_double(c.field); }}}

const std::map<std::string, Key>& registry() {
  static const std::map<std::string, Key> keys = [] {
    std::map<std::string, Key> k = {
        METAFL_SIZE_KEY("rounds", rounds, true),
        {"seed", Key{false,
                     [](ExperimentConfig& c, const std::string& key, std::string_view v) {
                       c.seed = parse_u64(key, v);
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.seed); }}},
        {"aggregator.mode",
         Key{true,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               try {
                 c.mode = aggregator_mode_from_string(v);
               } catch (const InvalidArgument&) {
                 bad_value(key, v, "metafl_closed, metafl_mirror, metafl_projected or fedavg");
               }
             },
             [](const ExperimentConfig& c) { return std::string(to_string(c.mode)); }}},
        {"aggregator.alpha_grid",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               c.alpha_grid = parse_list<double>(key, v, parse_double);
             },
             [](const ExperimentConfig& c) { return join(c.alpha_grid, format_double); }}},
        METAFL_SIZE_KEY("model.input_dim", spec.input_dim, true),
        METAFL_SIZE_KEY("model.hidden_dim", spec.hidden_dim, false),
        METAFL_SIZE_KEY("model.num_classes", spec.num_classes, true),
        {"model.activation",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               try {
                 c.spec.activation = activation_from_string(v);
               } catch (const InvalidArgument&) {
                 bad_value(key, v, "relu or tanh");
               }
             },
             [](const ExperimentConfig& c) { return std::string(to_string(c.spec.activation)); }}},
        {"data.source",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               if (v == "blobs") c.data.source = DataSource::blobs;
               else if (v == "csv") c.data.source = DataSource::csv;
               else bad_value(key, v, "blobs or csv");
             },
             [](const ExperimentConfig& c) {
               return std::string(c.data.source == DataSource::csv ? "csv" : "blobs");
             }}},
        METAFL_SIZE_KEY("data.samples", data.samples, false),
        METAFL_DOUBLE_KEY("data.spread", data.spread),
        {"data.csv_path", Key{false,
                              [](ExperimentConfig& c, const std::string&, std::string_view v) {
                                c.data.csv_path = std::string(v);
                              },
                              [](const ExperimentConfig& c) { return c.data.csv_path; }}},
        {"data.csv_header",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               c.data.csv_header = parse_bool(key, v);
             },
             [](const ExperimentConfig& c) {
               return std::string(c.data.csv_header ? "true" : "false");
             }}},
        METAFL_DOUBLE_KEY("data.global_val_fraction", data.global_val_fraction),
        METAFL_SIZE_KEY("partition.num_clients", partition.num_clients, true),
        METAFL_DOUBLE_KEY("partition.dirichlet_beta", partition.dirichlet_beta),
        METAFL_DOUBLE_KEY("partition.val_fraction", partition.val_fraction),
        {"partition.noise_clients",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               c.partition.noise_clients = parse_list<std::size_t>(key, v, parse_size);
             },
             [](const ExperimentConfig& c) {
               return join(c.partition.noise_clients,
                           [](std::size_t x) { return std::to_string(x); });
             }}},
        METAFL_DOUBLE_KEY("partition.label_noise_rate", partition.label_noise_rate),
        METAFL_DOUBLE_KEY("train.learning_rate", train.learning_rate),
        METAFL_SIZE_KEY("train.epochs", train.epochs, false),
        METAFL_SIZE_KEY("train.batch_size", train.batch_size, false),
        METAFL_DOUBLE_KEY("train.l2", train.l2),
        METAFL_DOUBLE_KEY("meta.alpha", meta.alpha),
        METAFL_DOUBLE_KEY("meta.lambda", meta.lambda),
        {"meta.tau", Key{false,
                         [](ExperimentConfig& c, const std::string& key, std::string_view v) {
                           c.meta.tau = parse_optional(key, v);
                         },
                         [](const ExperimentConfig& c) { return optional_text(c.meta.tau); }}},
        METAFL_DOUBLE_KEY("meta.eta", meta.eta),
        METAFL_SIZE_KEY("meta.max_iters", meta.max_iters, false),
        METAFL_DOUBLE_KEY("meta.tol", meta.tol),
        {"meta.normalize",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               c.meta.c.normalize = parse_bool(key, v);
             },
             [](const ExperimentConfig& c) {
               return std::string(c.meta.c.normalize ? "true" : "false");
             }}},
        {"report.target_accuracy",
         Key{false,
             [](ExperimentConfig& c, const std::string& key, std::string_view v) {
               c.target_accuracy = parse_optional(key, v);
             },
             [](const ExperimentConfig& c) { return optional_text(c.target_accuracy); }}},
        METAFL_DOUBLE_KEY("diagnose.log_h", log_h),
        METAFL_SIZE_KEY("diagnose.samples", diagnose_samples, false),
        METAFL_SIZE_KEY("runtime.threads", threads, false),
    };
    for (std::size_t j = 0; j < kNumMetaFeatures; ++j) {
      k.emplace("meta.c." + std::string(kMetaFeatureNames[j]),
                Key{false,
                    [j](ExperimentConfig& c, const std::string& key, std::string_view v) {
                      c.meta.c.c[j] = parse_double(key, v);
                    },
                    [j](const ExperimentConfig& c) { return format_double(c.meta.c.c[j]); }});
    }
    return k;
  }();
  return keys;
}

#undef METAFL_SIZE_KEY
#undef METAFL_DOUBLE_KEY

const std::map<std::string, std::string, std::less<>>& presets() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"preset_noisy_clients", R"(# 8 clients, two of them with 40% label noise.
seed = 1
rounds = 20
aggregator.mode = metafl_closed
aggregator.alpha_grid = 0,1,2,5,10
model.input_dim = 10
model.num_classes = 4
data.samples = 4000
data.spread = 1.5
partition.num_clients = 8
partition.dirichlet_beta = 0.5
partition.noise_clients = 0,1
partition.label_noise_rate = 0.4
train.learning_rate = 0.05
train.epochs = 1
train.batch_size = 32
meta.c.dataset_size = -1
meta.c.label_entropy = -1
)"},
      {"preset_noisy_clients_fedavg", R"(# FedAvg baseline on the preset_noisy_clients data.
seed = 1
rounds = 20
aggregator.mode = fedavg
aggregator.alpha_grid = 0,1,2,5,10
model.input_dim = 10
model.num_classes = 4
data.samples = 4000
data.spread = 1.5
partition.num_clients = 8
partition.dirichlet_beta = 0.5
partition.noise_clients = 0,1
partition.label_noise_rate = 0.4
train.learning_rate = 0.05
train.epochs = 1
train.batch_size = 32
meta.c.dataset_size = -1
meta.c.label_entropy = -1
)"},
      {"preset_iid", R"(# Near-IID partition, no noisy clients.
seed = 1
rounds = 10
aggregator.mode = metafl_closed
aggregator.alpha_grid = 0,1,2,5,10
model.input_dim = 10
model.num_classes = 4
data.samples = 4000
data.spread = 1.5
partition.num_clients = 8
partition.dirichlet_beta = 1000000
train.learning_rate = 0.05
train.epochs = 1
train.batch_size = 32
)"},
      {"preset_scale", R"(# 50 clients on a near-IID split, for scaling runs.
seed = 1
rounds = 5
aggregator.mode = metafl_closed
aggregator.alpha_grid = 0,1,2,5,10
model.input_dim = 10
model.num_classes = 4
data.samples = 4000
data.spread = 1.5
partition.num_clients = 50
partition.dirichlet_beta = 1000000
train.learning_rate = 0.05
train.epochs = 5
train.batch_size = 8
)"},
      {"preset_skew", R"(# Strong label skew (Dirichlet beta = 0.1).
seed = 1
rounds = 20
aggregator.mode = metafl_closed
aggregator.alpha_grid = 0,1,2,5,10
model.input_dim = 10
model.num_classes = 4
data.samples = 4000
data.spread = 1.5
partition.num_clients = 8
partition.dirichlet_beta = 0.1
train.learning_rate = 0.05
train.epochs = 1
train.batch_size = 32
)"},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  const auto& keys = registry();
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? text.npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(key + ": unknown key");
    if (!seen.insert(key).second) throw ConfigError(key + ": duplicate key");
    it->second.set(cfg, key, value);
  }
  for (const auto& [name, key] : keys) {
    if (key.required && !seen.count(name)) {
      throw ConfigError(name + ": missing required key");
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [name, key] : registry()) {
    out += name;
    out += " = ";
    out += key.get(cfg);
    out += '\n';
  }
  return out;
}

std::optional<std::string> preset_text(std::string_view name) {
  const auto& table = presets();
  if (const auto it = table.find(name); it != table.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : presets()) names.push_back(name);
  return names;
}

ExperimentConfig resolve_config(const std::string& name_or_path) {
  if (!std::filesystem::exists(name_or_path)) {
    if (auto text = preset_text(name_or_path)) return parse_config(*text);
  }
  return load_config(name_or_path);
}

}  // namespace metafl
