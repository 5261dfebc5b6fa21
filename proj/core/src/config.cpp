#include "hbf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace hbf {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message
                                  : source + ": " + message),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

IniDocument IniDocument::parse(std::string_view text, std::string source) {
  IniDocument doc;
  doc.source_ = std::move(source);
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::size_t comment = raw.find_first_of("#;");
    const std::string line = trim(raw.substr(0, comment));
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(doc.source_, line_no, "unterminated section header");
      }
      section = lower(trim(std::string_view(line).substr(1, line.size() - 2)));
      if (!valid_name(section)) {
        throw ConfigError(doc.source_, line_no, "invalid section name");
      }
      doc.entries_[section];
    } else {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(doc.source_, line_no, "expected key = value");
      }
      if (section.empty()) {
        throw ConfigError(doc.source_, line_no, "key outside of any [section]");
      }
      const std::string key = lower(trim(std::string_view(line).substr(0, eq)));
      if (!valid_name(key)) {
        throw ConfigError(doc.source_, line_no, "invalid key name");
      }
      auto& sec = doc.entries_[section];
      if (sec.count(key) != 0) {
        throw ConfigError(doc.source_, line_no,
                          "duplicate key '" + key + "' (first set on line " +
                              std::to_string(sec[key].line) + ")");
      }
      sec[key] = Entry{trim(std::string_view(line).substr(eq + 1)), line_no};
    }
    if (end == text.size()) break;
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path, 0, "cannot open config file");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const IniDocument::Entry* IniDocument::find(const std::string& section,
                                            const std::string& key) const {
  const auto s = entries_.find(section);
  if (s == entries_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void IniDocument::set(const std::string& section, const std::string& key, std::string value) {
  auto& e = entries_[section][key];
  e.value = std::move(value);
}

std::vector<std::string> IniDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> IniDocument::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto s = entries_.find(section);
  if (s != entries_.end()) {
    for (const auto& [name, _] : s->second) out.push_back(name);
  }
  return out;
}

std::string IniDocument::canonical() const {
  std::string out;
  for (const auto& [section, keys] : entries_) {
    for (const auto& [key, entry] : keys) {
      out += section + "." + key + "=" + entry.value + "\n";
    }
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::kSeVsSnr, "se_vs_snr"},
    {ExperimentKind::kSeVsPilotSnr, "se_vs_pilot_snr"},
    {ExperimentKind::kNmseVsPilotSnr, "nmse_vs_pilot_snr"},
    {ExperimentKind::kAngleMismatch, "angle_mismatch"},
    {ExperimentKind::kClusterSweep, "cluster_sweep"},
    {ExperimentKind::kTiming, "timing"},
    {ExperimentKind::kOnlineTrace, "online_trace"},
    {ExperimentKind::kTrain, "train"},
};

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::kMo, "MO"},
    {Method::kSdhb, "SDHB"},
    {Method::kShb, "SHB"},
    {Method::kPeHb, "PE-HB"},
    {Method::kFullyDigital, "fully-digital"},
    {Method::kFullyDigitalStat, "fully-digital-stat"},
};

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string to_string(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

std::optional<ExperimentKind> experiment_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  return std::nullopt;
}

std::optional<Method> method_from_string(const std::string& name) {
  const std::string key = lower(name);
  for (const auto& [m, n] : kMethodNames) {
    if (key == lower(n)) return m;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const std::string t = lower(s);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() == 1) {
      const auto v = to_double(parts[0]);
      if (!v) throw std::invalid_argument("not a number: '" + item + "'");
      out.push_back(*v);
    } else if (parts.size() == 3) {
      // start:step:stop, stop inclusive
      const auto a = to_double(parts[0]), d = to_double(parts[1]), b = to_double(parts[2]);
      if (!a || !d || !b || *d == 0.0 || !std::isfinite(*a) || !std::isfinite(*b) ||
          (*b - *a) / *d < 0.0) {
        throw std::invalid_argument("bad range '" + item + "', expected start:step:stop");
      }
      const auto count = static_cast<long>(std::floor((*b - *a) / *d + 1e-9));
      if (count > 100000) throw std::invalid_argument("range '" + item + "' is too long");
      for (long i = 0; i <= count; ++i) out.push_back(*a + static_cast<double>(i) * *d);
    } else {
      throw std::invalid_argument("bad list item '" + item + "'");
    }
  }
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(const IniDocument& doc) : doc_(doc) {}

  [[noreturn]] void fail(const IniDocument::Entry* e, const std::string& msg) const {
    throw ConfigError(doc_.source(), e != nullptr ? e->line : 0, msg);
  }

  const IniDocument::Entry* get(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    return doc_.find(section, key);
  }

  void read(const std::string& section, const std::string& key, std::string& out) {
    if (const auto* e = get(section, key)) out = e->value;
  }

  void read(const std::string& section, const std::string& key, double& out) {
    if (const auto* e = get(section, key)) {
      const auto v = to_double(e->value);
      if (!v || std::isnan(*v)) fail(e, section + "." + key + ": expected a number");
      out = *v;
    }
  }

  void read(const std::string& section, const std::string& key, int& out) {
    if (const auto* e = get(section, key)) {
      long long v = 0;
      const auto& s = e->value;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || v < INT32_MIN ||
          v > INT32_MAX) {
        fail(e, section + "." + key + ": expected an integer");
      }
      out = static_cast<int>(v);
    }
  }

  void read(const std::string& section, const std::string& key, std::uint64_t& out) {
    if (const auto* e = get(section, key)) {
      const auto& s = e->value;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        fail(e, section + "." + key + ": expected an unsigned 64-bit integer");
      }
    }
  }

  void read(const std::string& section, const std::string& key, bool& out) {
    if (const auto* e = get(section, key)) {
      const std::string v = lower(e->value);
      if (v == "true" || v == "1" || v == "yes" || v == "on") {
        out = true;
      } else if (v == "false" || v == "0" || v == "no" || v == "off") {
        out = false;
      } else {
        fail(e, section + "." + key + ": expected true or false");
      }
    }
  }

  void read_list(const std::string& section, const std::string& key, std::vector<double>& out) {
    if (const auto* e = get(section, key)) {
      try {
        out = parse_number_list(e->value);
      } catch (const std::invalid_argument& ex) {
        fail(e, section + "." + key + ": " + ex.what());
      }
    }
  }

  void read_list(const std::string& section, const std::string& key, std::vector<int>& out) {
    std::vector<double> vals;
    const auto* e = doc_.find(section, key);
    read_list(section, key, vals);
    if (e == nullptr) return;
    out.clear();
    for (double v : vals) {
      if (v != std::floor(v) || std::abs(v) > 1e9) fail(e, section + "." + key + ": expected integers");
      out.push_back(static_cast<int>(v));
    }
  }

  /// Runs `check`; an invalid_argument it throws is reported at the given key's line.
  template <class F>
  void check(const std::string& section, const std::string& key, F&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& ex) {
      fail(doc_.find(section, key), ex.what());
    }
  }

  void reject_unknown() const {
    for (const auto& section : doc_.sections()) {
      const auto keys = doc_.keys(section);
      for (const auto& key : keys) {
        if (used_.count(section + "." + key) == 0) {
          fail(doc_.find(section, key), "unknown key '" + key + "' in [" + section + "]");
        }
      }
      if (keys.empty() && known_sections_.count(section) == 0) {
        throw ConfigError(doc_.source(), 0, "unknown section [" + section + "]");
      }
    }
  }

  void know(const std::string& section) { known_sections_.insert(section); }

 private:
  const IniDocument& doc_;
  std::set<std::string> used_;
  std::set<std::string> known_sections_;
};

void apply_paper_defaults(ExperimentConfig& c) {
  c.dims = SystemDims{128, 16, 4, 4};
  c.dataset.scenarios = 100;
  c.dataset.realizations = 200;
  // Each preamble SNR paired with one (SNR_R, SNR_H) level: nine combinations.
  c.dataset.snr.clear();
  const double pilot[] = {20.0, 30.0, 40.0};
  const double cov[] = {20.0, 25.0, 30.0};
  const double chan[] = {15.0, 20.0, 25.0};
  for (double p : pilot) {
    for (int k = 0; k < 3; ++k) c.dataset.snr.push_back(SnrTriple{cov[k], chan[k], p});
  }
  c.covnet_arch = default_architecture(NetRole::kCovNet, false);
  c.channelnet_arch = default_architecture(NetRole::kChannelNet, false);
  c.bfnet_arch = default_architecture(NetRole::kBfNet, false);
}

void apply_desk_defaults(ExperimentConfig& c) {
  c.dims = SystemDims{16, 4, 2, 2};
  c.dataset.scenarios = 20;
  c.dataset.realizations = 50;
  c.dataset.snr = {SnrTriple{20.0, 15.0, 20.0}};
  c.covnet_arch = default_architecture(NetRole::kCovNet, true);
  c.channelnet_arch = default_architecture(NetRole::kChannelNet, true);
  c.bfnet_arch = default_architecture(NetRole::kBfNet, true);
  // 800 training samples give 7 steps per epoch at the full batch size of 128.
  c.train.batch_size = 16;
  // Validation on 200 samples is noisy; three epochs stops well before the nets fit.
  c.train.patience = 8;
  // One fine-tune pass over the 0.7M-weight dense head costs about 0.1 s per epoch here.
  c.online.online.fine_tune.max_epochs = 10;
}

std::vector<double> default_grid(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSeVsSnr:
      return parse_number_list("-20:5:10");
    case ExperimentKind::kSeVsPilotSnr:
    case ExperimentKind::kNmseVsPilotSnr:
      return parse_number_list("-20:5:20");
    case ExperimentKind::kAngleMismatch:
      return parse_number_list("0:1:6");
    case ExperimentKind::kClusterSweep:
      return parse_number_list("1:1:10");
    default:
      return {};
  }
}

void read_arch(Reader& r, const std::string& prefix, ArchitectureOptions& arch) {
  r.read("models", prefix + "_filters", arch.conv_filters);
  r.read_list("models", prefix + "_fc", arch.fc_units);
  r.check("models", prefix + "_filters", [&] {
    if (arch.conv_filters < 1) throw std::invalid_argument("models." + prefix + "_filters must be >= 1");
  });
  r.check("models", prefix + "_fc", [&] {
    if (arch.fc_units.empty()) throw std::invalid_argument("models." + prefix + "_fc must be nonempty");
    for (int u : arch.fc_units) {
      if (u < 1) throw std::invalid_argument("models." + prefix + "_fc entries must be >= 1");
    }
  });
}

}  // namespace

ExperimentConfig parse_experiment(const IniDocument& doc, bool desk_scale_override) {
  Reader r(doc);
  ExperimentConfig c;

  std::string kind_name = "se_vs_snr";
  r.read("experiment", "kind", kind_name);
  const auto kind = experiment_kind_from_string(kind_name);
  if (!kind) {
    r.fail(doc.find("experiment", "kind"), "experiment.kind: unknown experiment '" + kind_name + "'");
  }
  c.kind = *kind;
  r.read("experiment", "desk_scale", c.desk_scale);
  c.desk_scale = c.desk_scale || desk_scale_override;
  if (c.desk_scale) {
    apply_desk_defaults(c);
  } else {
    apply_paper_defaults(c);
  }
  r.read("experiment", "trials", c.trials);
  r.read("experiment", "seed", c.seed);
  r.read("experiment", "output", c.output);
  r.read("experiment", "threads", c.threads);
  r.check("experiment", "trials", [&] {
    if (c.trials < 1) throw std::invalid_argument("experiment.trials must be >= 1");
  });
  r.check("experiment", "threads", [&] {
    if (c.threads < 1) throw std::invalid_argument("experiment.threads must be >= 1");
  });

  r.read("dims", "n_t", c.dims.n_t);
  r.read("dims", "n_r", c.dims.n_r);
  r.read("dims", "n_rf", c.dims.n_rf);
  r.read("dims", "n_s", c.dims.n_s);
  r.check("dims", "n_rf", [&] { c.dims.validate(); });

  r.read("scenario", "clusters", c.scenario.clusters);
  r.read("scenario", "rays_per_cluster", c.scenario.rays_per_cluster);
  r.read("scenario", "spread_deg", c.scenario.spread_deg);
  r.read("scenario", "gain_variance", c.scenario.gain_variance);
  r.read("scenario", "spacing_ratio", c.scenario.spacing_ratio);
  r.read("scenario", "covariance_realizations", c.scenario.covariance_realizations);
  r.check("scenario", "clusters", [&] { c.scenario.validate(); });

  c.grid = default_grid(c.kind);
  r.read_list("sweep", "values", c.grid);
  r.read("sweep", "snr_db", c.snr_db);
  r.read("sweep", "pilot_snr_db", c.pilot_snr_db);
  r.read("sweep", "covariance_snr_db", c.covariance_snr_db);
  r.read("sweep", "channel_snr_db", c.channel_snr_db);
  const bool swept = c.kind != ExperimentKind::kTiming && c.kind != ExperimentKind::kOnlineTrace &&
                     c.kind != ExperimentKind::kTrain;
  r.check("sweep", "values", [&] {
    if (swept && c.grid.empty()) throw std::invalid_argument("sweep.values must be nonempty");
    if (c.kind == ExperimentKind::kClusterSweep) {
      for (double v : c.grid) {
        if (v < 1.0 || v != std::floor(v)) {
          throw std::invalid_argument("sweep.values: cluster counts must be positive integers");
        }
      }
    }
    if (c.kind == ExperimentKind::kAngleMismatch) {
      for (double v : c.grid) {
        if (v < 0.0) throw std::invalid_argument("sweep.values: mismatch deviations must be >= 0");
      }
    }
  });

  c.methods = {Method::kFullyDigital, Method::kFullyDigitalStat, Method::kMo,
               Method::kSdhb,         Method::kShb,              Method::kPeHb};
  if (const auto* e = r.get("methods", "list")) {
    c.methods.clear();
    for (const auto& name : split(e->value, ',')) {
      const auto m = method_from_string(name);
      if (!m) r.fail(e, "methods.list: unknown method '" + name + "'");
      if (std::find(c.methods.begin(), c.methods.end(), *m) != c.methods.end()) {
        r.fail(e, "methods.list: duplicate method '" + name + "'");
      }
      c.methods.push_back(*m);
    }
  }
  r.check("methods", "list", [&] {
    if (c.methods.empty()) throw std::invalid_argument("methods.list must be nonempty");
  });

  r.read("models", "dir", c.model_dir);
  if (c.model_dir.empty()) c.model_dir = c.output;
  read_arch(r, "covnet", c.covnet_arch);
  read_arch(r, "channelnet", c.channelnet_arch);
  read_arch(r, "bfnet", c.bfnet_arch);
  double dropout = c.covnet_arch.dropout_p;
  r.read("models", "dropout", dropout);
  r.check("models", "dropout", [&] {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("models.dropout must be in [0, 1)");
  });
  c.covnet_arch.dropout_p = c.channelnet_arch.dropout_p = c.bfnet_arch.dropout_p = dropout;

  DatasetSpec& ds = c.dataset;
  ds.dims = c.dims;
  ds.scenario = c.scenario;
  ds.seed = derive_seed(c.seed, 1);
  r.read("dataset", "scenarios", ds.scenarios);
  r.read("dataset", "realizations", ds.realizations);
  if (const auto* e = r.get("dataset", "snr")) {
    // R/H/pilot triples separated by commas, e.g. "20/15/20, 25/20/30"
    ds.snr.clear();
    for (const auto& item : split(e->value, ',')) {
      const auto parts = split(item, '/');
      std::optional<double> a, b, p;
      if (parts.size() == 3) {
        a = to_double(parts[0]);
        b = to_double(parts[1]);
        p = to_double(parts[2]);
      }
      if (!a || !b || !p) r.fail(e, "dataset.snr: expected R/H/pilot triples, got '" + item + "'");
      ds.snr.push_back(SnrTriple{*a, *b, *p});
    }
  }
  r.read_list("dataset", "train_clusters", ds.train_clusters);
  r.read("dataset", "design_snr_db", ds.design_snr_db);
  r.read("dataset", "pilot_tx_beams", ds.pilot_tx_beams);
  r.read("dataset", "pilot_rx_beams", ds.pilot_rx_beams);
  r.read("dataset", "seed", ds.seed);
  r.read("dataset", "save", c.save_datasets);

  r.read("solver", "max_iter", ds.precoder_options.manifold.max_iter);
  r.read("solver", "grad_tol_scale", ds.precoder_options.manifold.grad_tol_scale);
  r.read("solver", "max_outer", ds.precoder_options.max_outer);
  r.read("solver", "outer_tol", ds.precoder_options.outer_tol);
  r.read("solver", "weighted_rf_objective", ds.combiner_options.weighted_rf_objective);
  ds.combiner_options.manifold = ds.precoder_options.manifold;
  ds.combiner_options.max_outer = ds.precoder_options.max_outer;
  ds.combiner_options.outer_tol = ds.precoder_options.outer_tol;
  r.check("solver", "max_iter", [&] {
    if (ds.precoder_options.manifold.max_iter < 1 || ds.precoder_options.max_outer < 1 ||
        !(ds.precoder_options.outer_tol > 0.0) || !(ds.precoder_options.manifold.grad_tol_scale >= 0.0)) {
      throw std::invalid_argument("solver: iteration limits must be >= 1 and tolerances > 0");
    }
  });
  r.check("dataset", "scenarios", [&] { ds.validate(); });

  r.read("train", "learning_rate", c.train.learning_rate);
  r.read("train", "momentum", c.train.momentum);
  r.read("train", "batch_size", c.train.batch_size);
  r.read("train", "lr_decay", c.train.lr_decay);
  r.read("train", "lr_decay_every", c.train.lr_decay_every);
  r.read("train", "patience", c.train.patience);
  r.read("train", "max_epochs", c.train.max_epochs);
  r.read("train", "validation_fraction", c.train.validation_fraction);
  r.read("train", "standardize_labels", c.train.standardize_labels);
  c.train.seed = derive_seed(c.seed, 2);
  r.check("train", "learning_rate", [&] { c.train.validate(); });

  OnlineExperiment& on = c.online;
  on.omp.spacing_ratio = c.scenario.spacing_ratio;
  on.omp.sparsity = c.scenario.clusters;
  r.read("online", "zeta", on.online.zeta);
  r.read("online", "g_y", on.online.g_y);
  r.read("online", "snr_y_db", on.online.snr_y_db);
  on.online.fine_tune.learning_rate = c.train.learning_rate * 0.1;
  on.online.fine_tune.momentum = c.train.momentum;
  on.online.fine_tune.batch_size = c.train.batch_size;
  on.online.fine_tune.validation_fraction = c.train.validation_fraction;
  r.read("online", "fine_tune_lr", on.online.fine_tune.learning_rate);
  r.read("online", "fine_tune_epochs", on.online.fine_tune.max_epochs);
  r.read("online", "fine_tune_patience", on.online.fine_tune.patience);
  r.read("online", "steps", on.steps);
  r.read("online", "drift_start_deg", on.drift_start_deg);
  r.read("online", "drift_end_deg", on.drift_end_deg);
  r.read("online", "seeds", on.seeds);
  r.read("online", "pilot_snr_db", on.pilot_snr_db);
  r.read("online", "omp_grid", on.omp.grid_size);
  r.read("online", "omp_sparsity", on.omp.sparsity);
  r.check("online", "zeta", [&] { on.online.validate(); });
  r.check("online", "steps", [&] {
    if (on.steps < 2 || on.seeds < 1 || on.omp.grid_size < 1 || on.omp.sparsity < 1) {
      throw std::invalid_argument("online: steps >= 2, seeds, omp_grid and omp_sparsity >= 1 required");
    }
  });

  for (const char* s : {"experiment", "dims", "scenario", "sweep", "methods", "models", "dataset",
                        "train", "solver", "online"}) {
    r.know(s);
  }
  r.reject_unknown();

  c.hash = fnv1a64(doc.canonical() + (desk_scale_override ? "cli.desk_scale=true\n" : ""));
  return c;
}

}  // namespace hbf
