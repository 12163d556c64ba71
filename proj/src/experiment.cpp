#include "fedclip/experiment.hpp"

#include "fedclip/checkpoint.hpp"
#include "fedclip/classical.hpp"
#include "fedclip/contrastive.hpp"
#include "fedclip/data.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/federation.hpp"
#include "fedclip/metrics.hpp"
#include "fedclip/models.hpp"
#include "fedclip/optim.hpp"
#include "fedclip/seeding.hpp"
#include "fedclip/training.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace fedclip {

using nlohmann::json;

json apply_overrides(json config, std::span<const std::string> overrides) {
  if (!config.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + item + "' is not of the form key.path=value");
    }
    const std::string path = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &config;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (key.empty()) throw ConfigError("override '" + item + "' has an empty path segment");
      if (!node->is_object()) {
        throw ConfigError("override '" + item + "': '" + path.substr(0, start - 1) + "' is not an object");
      }
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      if (node->is_null()) *node = json::object();
      start = dot + 1;
    }
  }
  return config;
}

namespace {

/// Reads one JSON object, remembering which keys were consumed so that
/// unknown (typically misspelled) keys can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : path_(std::move(path)) {
    if (!j.is_null() && !j.is_object()) throw ConfigError(where() + ": expected an object");
    if (j.is_object()) j_ = j;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key, const std::string& why) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": required " + why);
    return convert<T>(key);
  }

  json sub(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? j_.at(key) : json(nullptr);
  }

  void forbid(const std::string& key, const std::string& why) {
    if (j_.contains(key)) throw ConfigError(field(key) + ": not allowed " + why);
    used_.insert(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  json j_ = json::object();
  std::string path_;
  std::set<std::string> used_;
};

void require_positive(const std::string& field, double v) {
  if (!(v > 0.0)) throw ConfigError(field + ": must be > 0");
}

void require_at_least(const std::string& field, long long v, long long lo) {
  if (v < lo) throw ConfigError(field + ": must be >= " + std::to_string(lo));
}

json optimizer_to_json(const OptimizerSpec& s) {
  json j = {{"kind", to_string(s.kind)}, {"lr", s.lr}, {"weight_decay", s.weight_decay}, {"eps", s.eps}};
  if (s.betas) j["betas"] = {s.betas->first, s.betas->second};
  if (s.rho) j["rho"] = *s.rho;
  if (s.momentum) j["momentum"] = *s.momentum;
  return j;
}

OptimizerSpec optimizer_from_json(const json& j) {
  OptimizerSpec s;
  s.kind = parse_optimizer_kind(j.at("kind").get<std::string>());
  s.lr = j.at("lr").get<double>();
  s.weight_decay = j.at("weight_decay").get<double>();
  s.eps = j.at("eps").get<double>();
  if (j.contains("betas")) s.betas = std::pair{j["betas"][0].get<double>(), j["betas"][1].get<double>()};
  if (j.contains("rho")) s.rho = j["rho"].get<double>();
  if (j.contains("momentum")) s.momentum = j["momentum"].get<double>();
  return s;
}

json resolve_optimizer(const json& raw, OptimizerKind default_kind) {
  Section s(raw, "optimizer");
  const std::string kind_name = s.get<std::string>("kind", to_string(default_kind));
  OptimizerKind kind;
  try {
    kind = parse_optimizer_kind(kind_name);
  } catch (const ConfigError& e) {
    throw ConfigError("optimizer.kind: " + std::string(e.what()));
  }
  OptimizerOverrides o;
  if (s.has("lr")) o.lr = s.get<double>("lr", 0.0);
  if (s.has("weight_decay")) o.weight_decay = s.get<double>("weight_decay", 0.0);
  if (s.has("eps")) o.eps = s.get<double>("eps", 0.0);
  const bool adam = kind == OptimizerKind::Adam || kind == OptimizerKind::AdamW;
  if (adam) {
    if (s.has("betas")) {
      const auto b = s.get<std::vector<double>>("betas", {});
      if (b.size() != 2) throw ConfigError("optimizer.betas: expected two numbers");
      o.betas = std::pair{b[0], b[1]};
    }
  } else {
    s.forbid("betas", "for optimizer " + kind_name);
  }
  if (kind == OptimizerKind::Adadelta) {
    if (s.has("rho")) o.rho = s.get<double>("rho", 0.0);
  } else {
    s.forbid("rho", "for optimizer " + kind_name);
  }
  if (kind == OptimizerKind::SGD) {
    if (s.has("momentum")) o.momentum = s.get<double>("momentum", 0.0);
  } else {
    s.forbid("momentum", "for optimizer " + kind_name);
  }
  s.finish();
  try {
    return optimizer_to_json(make_optimizer(kind, o));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()));
  }
}

enum class Task { Multimodal, Federated, Hybrid };

Task parse_task(const std::string& name) {
  if (name == "multimodal") return Task::Multimodal;
  if (name == "federated") return Task::Federated;
  if (name == "hybrid") return Task::Hybrid;
  throw ConfigError("task: unknown task '" + name + "' (expected multimodal, federated or hybrid)");
}

}  // namespace

json resolve_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("config: top level must be a JSON object");
  Section top(raw, "");
  const std::string task_name = top.require<std::string>("task", "(multimodal, federated or hybrid)");
  const Task task = parse_task(task_name);
  const std::string for_task = "for task=" + task_name;

  json out;
  out["task"] = task_name;
  const auto seed = top.get<std::uint64_t>("seed", 0);
  out["seed"] = seed;
  out["output_dir"] = top.get<std::string>("output_dir", "runs/" + task_name);

  const int default_batch = task == Task::Multimodal ? 16 : 32;
  out["batch_size"] = top.get<int>("batch_size", default_batch);
  require_at_least("batch_size", out["batch_size"].get<int>(), 1);
  if (task == Task::Federated) {
    top.forbid("epochs", for_task + " (use federation.rounds and federation.local_epochs)");
  } else {
    out["epochs"] = top.get<int>("epochs", 50);
    require_at_least("epochs", out["epochs"].get<int>(), 1);
  }
  const std::string loss = top.get<std::string>("loss", "contrastive");
  try {
    parse_loss_kind(loss);
  } catch (const ConfigError& e) {
    throw ConfigError("loss: " + std::string(e.what()));
  }
  out["loss"] = loss;

  // dataset
  {
    Section d(top.sub("dataset"), "dataset");
    const std::string source = d.get<std::string>("source", "synthetic");
    json ds = {{"source", source}};
    if (source == "synthetic") {
      d.forbid("train", "for dataset.source=synthetic");
      d.forbid("test", "for dataset.source=synthetic");
      ds["classes"] = d.get<int>("classes", 3);
      ds["per_class"] = d.get<int>("per_class", 300);
      ds["input_dim"] = d.get<int>("input_dim", 16);
      ds["separation"] = d.get<double>("separation", 4.0);
      require_at_least("dataset.classes", ds["classes"].get<int>(), 2);
      require_at_least("dataset.per_class", ds["per_class"].get<int>(), 1);
      require_at_least("dataset.input_dim", ds["input_dim"].get<int>(), 1);
      if (!(ds["separation"].get<double>() >= 0.0)) throw ConfigError("dataset.separation: must be >= 0");
      if (task == Task::Hybrid) {
        ds["test_per_class"] = d.get<int>("test_per_class", 100);
        ds["test_shift"] = d.get<double>("test_shift", 1.0);
        require_at_least("dataset.test_per_class", ds["test_per_class"].get<int>(), 1);
      } else {
        d.forbid("test_per_class", for_task);
        d.forbid("test_shift", for_task);
      }
    } else if (source == "csv") {
      for (const char* k : {"classes", "per_class", "input_dim", "separation", "test_per_class", "test_shift"}) {
        d.forbid(k, "for dataset.source=csv");
      }
      ds["train"] = d.require<std::string>("train", "for dataset.source=csv");
      if (task == Task::Federated) {
        d.forbid("test", for_task + " (client test splits come from the partition)");
      } else if (d.has("test")) {
        ds["test"] = d.get<std::string>("test", "");
      }
    } else {
      throw ConfigError("dataset.source: unknown source '" + source + "' (expected synthetic or csv)");
    }
    const bool holdout = task == Task::Multimodal || (task == Task::Hybrid && source == "csv" && !ds.contains("test"));
    if (holdout) {
      ds["test_fraction"] = d.get<double>("test_fraction", 0.2);
      const double f = ds["test_fraction"].get<double>();
      if (!(f > 0.0 && f < 1.0)) throw ConfigError("dataset.test_fraction: must lie in (0, 1)");
    } else {
      d.forbid("test_fraction", for_task);
    }
    d.finish();
    out["dataset"] = ds;
  }

  // model
  {
    Section m(top.sub("model"), "model");
    out["model"]["hidden"] = m.get<std::vector<int>>("hidden", {64});
    out["model"]["embed_dim"] = m.get<int>("embed_dim", 32);
    for (int w : out["model"]["hidden"].get<std::vector<int>>()) require_at_least("model.hidden", w, 1);
    require_at_least("model.embed_dim", out["model"]["embed_dim"].get<int>(), 1);
    m.finish();
  }

  // contrastive
  {
    const json raw_c = top.sub("contrastive");
    if (task == Task::Multimodal && raw_c.is_null()) {
      throw ConfigError("contrastive.temperature: required for task=multimodal");
    }
    Section c(raw_c, "contrastive");
    const double tau = task == Task::Multimodal ? c.require<double>("temperature", for_task)
                                                : c.get<double>("temperature", kDefaultTemperature);
    require_positive("contrastive.temperature", tau);
    out["contrastive"]["temperature"] = tau;
    out["contrastive"]["prompt_template"] = c.get<std::string>("prompt_template", kDefaultPromptTemplate);
    out["contrastive"]["text_seed"] = c.get<std::uint64_t>("text_seed", derive_seed(seed, "text"));
    c.finish();
  }

  const OptimizerKind default_opt = task == Task::Multimodal ? OptimizerKind::Adagrad : OptimizerKind::SGD;
  out["optimizer"] = resolve_optimizer(top.sub("optimizer"), default_opt);

  if (task == Task::Federated) {
    Section f(top.sub("federation"), "federation");
    json fj;
    fj["clients"] = f.get<int>("clients", 3);
    fj["rounds"] = f.get<int>("rounds", 50);
    fj["local_epochs"] = f.get<int>("local_epochs", 1);
    const std::string strategy = f.get<std::string>("strategy", "fedavg");
    try {
      parse_strategy(strategy);
    } catch (const ConfigError& e) {
      throw ConfigError("federation.strategy: " + std::string(e.what()));
    }
    fj["strategy"] = strategy;
    if (strategy == "fedprox") {
      fj["mu"] = f.get<double>("mu", kDefaultProximalMu);
      if (!(fj["mu"].get<double>() >= 0.0)) throw ConfigError("federation.mu: must be >= 0");
    } else {
      f.forbid("mu", "for federation.strategy=fedavg");
    }
    fj["parallel"] = f.get<bool>("parallel", false);
    fj["persist_optimizer_state"] = f.get<bool>("persist_optimizer_state", false);
    require_at_least("federation.clients", fj["clients"].get<int>(), 1);
    require_at_least("federation.rounds", fj["rounds"].get<int>(), 1);
    require_at_least("federation.local_epochs", fj["local_epochs"].get<int>(), 1);
    f.finish();
    out["federation"] = fj;
  } else {
    top.forbid("federation", for_task);
  }

  if (task == Task::Hybrid) {
    Section c(top.sub("classical"), "classical");
    json cj;
    cj["knn_k"] = c.get<int>("knn_k", kDefaultKnnK);
    cj["svm_lambda"] = c.get<double>("svm_lambda", kDefaultSvmLambda);
    cj["svm_iterations"] = c.get<int>("svm_iterations", kDefaultSvmIterations);
    cj["svm_average"] = c.get<bool>("svm_average", false);
    cj["normalize_features"] = c.get<bool>("normalize_features", false);
    require_at_least("classical.knn_k", cj["knn_k"].get<int>(), 1);
    require_positive("classical.svm_lambda", cj["svm_lambda"].get<double>());
    require_at_least("classical.svm_iterations", cj["svm_iterations"].get<int>(), 1);
    c.finish();
    out["classical"] = cj;
  } else {
    top.forbid("classical", for_task);
  }

  top.finish();
  return out;
}

json derived_seeds(const json& resolved) {
  const auto seed = resolved.at("seed").get<std::uint64_t>();
  return {{"data", derive_seed(seed, "data")},
          {"test_samples", derive_seed(seed, "test-samples")},
          {"holdout", derive_seed(seed, "holdout")},
          {"partition", derive_seed(seed, "partition")},
          {"model", derive_seed(seed, "model")},
          {"text", resolved.at("contrastive").at("text_seed").get<std::uint64_t>()},
          {"training", derive_seed(seed, "training")},
          {"svm", derive_seed(seed, "svm")}};
}

namespace {

struct Inputs {
  Dataset train;
  std::optional<Dataset> test;
};

Inputs load_inputs(const json& cfg, const json& seeds) {
  const json& ds = cfg.at("dataset");
  Inputs in;
  if (ds.at("source") == "synthetic") {
    BlobSpec spec;
    spec.num_classes = ds.at("classes").get<int>();
    spec.per_class = ds.at("per_class").get<int>();
    spec.input_dim = ds.at("input_dim").get<int>();
    spec.separation = ds.at("separation").get<double>();
    spec.seed = seeds.at("data").get<std::uint64_t>();
    in.train = generate_blobs(spec);
    if (ds.contains("test_shift")) {
      BlobSpec test = spec;
      test.per_class = ds.at("test_per_class").get<int>();
      test.sample_seed = seeds.at("test_samples").get<std::uint64_t>();
      test.shift = ds.at("test_shift").get<double>();
      in.test = generate_blobs(test);
      in.test->name = "blobs-shifted";
    }
  } else {
    in.train = load_csv(ds.at("train").get<std::string>());
    if (ds.contains("test")) in.test = load_csv(ds.at("test").get<std::string>(), in.train.class_names);
  }
  validate(in.train);
  if (in.test) {
    validate(*in.test);
    if (in.test->input_dim() != in.train.input_dim()) {
      throw ConfigError("dataset.test: feature width differs from dataset.train");
    }
  }
  return in;
}

std::vector<int> encoder_widths(const json& cfg, int input_dim) {
  std::vector<int> widths{input_dim};
  for (int w : cfg.at("model").at("hidden").get<std::vector<int>>()) widths.push_back(w);
  return widths;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string metrics_csv(const MetricsReport& r) {
  return fmt(r.acc) + "," + fmt(r.bacc) + "," + fmt(r.precision_weighted) + "," + fmt(r.recall_weighted) +
         "," + fmt(r.f1_weighted) + "," + fmt(r.avg);
}

constexpr const char* kMetricColumns = "acc,bacc,precision_weighted,recall_weighted,f1_weighted,avg";

MetricsReport evaluate_anchor_head(const EncoderModel& model, const Dataset& data,
                                   const TextEmbeddingTable& table, const ContrastiveConfig& cc) {
  const Classification cls = classify(encode_images(model, data.inputs), table, cc);
  return report(confusion(data.labels, cls.labels, table.num_classes()));
}

struct CentralResult {
  EncoderModel model;
  std::vector<std::string> history_rows;
};

/// Centralized training with per-epoch evaluation on `eval`.
CentralResult train_centralized(const json& cfg, const json& seeds, const Dataset& train, const Dataset& eval,
                                const TextEmbeddingTable& table, const ContrastiveConfig& cc) {
  CentralResult r;
  r.model = init_encoder(encoder_widths(cfg, train.input_dim()), cfg.at("model").at("embed_dim").get<int>(),
                         seeds.at("model").get<std::uint64_t>());
  const OptimizerSpec spec = optimizer_from_json(cfg.at("optimizer"));
  OptimizerState state;
  Rng rng(seeds.at("training").get<std::uint64_t>());
  const LossSetup loss{parse_loss_kind(cfg.at("loss").get<std::string>()), &table, cc};
  const int epochs = cfg.at("epochs").get<int>();
  const int batch = cfg.at("batch_size").get<int>();
  for (int e = 1; e <= epochs; ++e) {
    EpochStats stats;
    try {
      stats = train_epoch(r.model, spec, state, train, batch, rng, loss);
    } catch (const NumericError& err) {
      throw NumericError("epoch " + std::to_string(e) + ": " + err.what());
    }
    const Matrix emb = encode_images(r.model, eval.inputs);
    const double test_loss = anchor_loss(emb, eval.labels, table, cc);
    const MetricsReport m = evaluate_anchor_head(r.model, eval, table, cc);
    r.history_rows.push_back(std::to_string(e) + "," + fmt(stats.mean_loss) + "," + fmt(test_loss) + "," +
                             metrics_csv(m));
  }
  return r;
}

void write_lines(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) throw DataError(path.string() + ": write failed");
}

json class_mapping(const std::vector<std::string>& names) {
  json j = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) j.push_back({{"index", i}, {"name", names[i]}});
  return j;
}

}  // namespace

RunOutcome run_experiment(const json& raw, std::span<const std::string> overrides,
                          const std::filesystem::path& output_dir) {
  const auto started = std::chrono::steady_clock::now();
  const json cfg = resolve_config(apply_overrides(raw, overrides));
  const json seeds = derived_seeds(cfg);
  const std::string task = cfg.at("task").get<std::string>();

  RunOutcome outcome;
  outcome.output_dir = output_dir.empty() ? std::filesystem::path(cfg.at("output_dir").get<std::string>()) : output_dir;
  std::filesystem::create_directories(outcome.output_dir);
  outcome.summary_path = outcome.output_dir / "summary.json";
  outcome.history_path = outcome.output_dir / "history.csv";

  Inputs in = load_inputs(cfg, seeds);
  const ContrastiveConfig cc{cfg.at("contrastive").at("temperature").get<double>()};
  const TextEmbeddingTable table =
      build_text_table(in.train.class_names, cfg.at("contrastive").at("prompt_template").get<std::string>(),
                       cfg.at("model").at("embed_dim").get<int>(), seeds.at("text").get<std::uint64_t>());

  json summary;
  summary["config"] = cfg;
  summary["overrides"] = std::vector<std::string>(overrides.begin(), overrides.end());
  summary["derived_seeds"] = seeds;
  summary["text_table"] = {{"requested_seed", table.requested_seed()},
                           {"effective_seed", table.effective_seed()},
                           {"prompts", json::array()}};
  for (const auto& name : table.class_names()) {
    summary["text_table"]["prompts"].push_back(render_prompt(table.prompt_template(), name));
  }
  summary["class_names"] = class_mapping(in.train.class_names);
  json artifacts = {{"summary", "summary.json"}, {"history", "history.csv"}};
  json timing;

  if (task == "multimodal") {
    Dataset train, test;
    if (in.test) {
      train = in.train;
      test = *in.test;
    } else {
      std::tie(train, test) =
          train_test_split(in.train, cfg.at("dataset").at("test_fraction").get<double>(), seeds.at("holdout").get<std::uint64_t>());
    }
    CentralResult r = train_centralized(cfg, seeds, train, test, table, cc);
    write_lines(outcome.history_path, std::string("epoch,train_loss,test_loss,") + kMetricColumns, r.history_rows);
    write_json(to_checkpoint(r.model), outcome.output_dir / "encoder.ckpt.json");
    artifacts["checkpoints"] = {{"encoder", "encoder.ckpt.json"}};
    summary["results"] = {{"train_size", train.size()},
                          {"test_size", test.size()},
                          {"test_loss", anchor_loss(encode_images(r.model, test.inputs), test.labels, table, cc)},
                          {"metrics", to_json(evaluate_anchor_head(r.model, test, table, cc))}};
  } else if (task == "federated") {
    const json& fj = cfg.at("federation");
    FederationConfig fc;
    fc.num_clients = fj.at("clients").get<int>();
    fc.rounds = fj.at("rounds").get<int>();
    fc.local_epochs = fj.at("local_epochs").get<int>();
    fc.strategy = parse_strategy(fj.at("strategy").get<std::string>());
    fc.mu = fj.value("mu", 0.0);
    fc.optimizer = optimizer_from_json(cfg.at("optimizer"));
    fc.batch_size = cfg.at("batch_size").get<int>();
    fc.loss_kind = parse_loss_kind(cfg.at("loss").get<std::string>());
    fc.seed = seeds.at("training").get<std::uint64_t>();
    fc.parallel = fj.at("parallel").get<bool>();
    fc.persist_optimizer_state = fj.at("persist_optimizer_state").get<bool>();

    const FederatedSplit split = federated_partition(in.train, fc.num_clients, seeds.at("partition").get<std::uint64_t>());
    std::vector<ClientState> clients = make_clients(split);
    const ModelContext ctx{init_encoder(encoder_widths(cfg, in.train.input_dim()),
                                        cfg.at("model").at("embed_dim").get<int>(),
                                        seeds.at("model").get<std::uint64_t>()),
                           table, cc};
    const FederationResult result = run_federation(clients, fc, ctx);

    std::vector<std::string> rows;
    json rounds = json::array();
    for (const auto& rec : result.history) {
      for (std::size_t c = 0; c < clients.size(); ++c) {
        const auto& losses = rec.client_train_losses[c];
        rows.push_back(std::to_string(rec.round) + "," + std::to_string(clients[c].client_id) + "," +
                       fmt(losses.back()) + "," + fmt(rec.client_test_losses[c]) + "," +
                       metrics_csv(rec.client_metrics[c]));
      }
      rounds.push_back({{"round", rec.round}, {"mean_test_loss", rec.mean_test_loss}, {"overall", to_json(rec.overall)}});
      timing["round_seconds"].push_back(rec.duration_seconds);
    }
    write_lines(outcome.history_path, std::string("round,client,train_loss,test_loss,") + kMetricColumns, rows);

    EncoderModel global = ctx.architecture;
    set_parameters(global, result.final_params);
    write_json(to_checkpoint(global), outcome.output_dir / "global_encoder.ckpt.json");
    artifacts["checkpoints"] = {{"global_encoder", "global_encoder.ckpt.json"}};

    const RoundRecord& last = result.history.back();
    json per_client = json::array();
    for (std::size_t c = 0; c < clients.size(); ++c) {
      per_client.push_back({{"client", clients[c].client_id},
                            {"train_size", clients[c].train.size()},
                            {"val_size", clients[c].val.size()},
                            {"test_size", clients[c].test.size()},
                            {"test_loss", last.client_test_losses[c]},
                            {"metrics", to_json(last.client_metrics[c])}});
    }
    summary["results"] = {{"mean_test_loss", last.mean_test_loss},
                          {"metrics", to_json(last.overall)},
                          {"clients", per_client},
                          {"rounds", rounds}};
  } else {
    Dataset train, test;
    if (in.test) {
      train = in.train;
      test = *in.test;
    } else {
      std::tie(train, test) =
          train_test_split(in.train, cfg.at("dataset").at("test_fraction").get<double>(), seeds.at("holdout").get<std::uint64_t>());
    }
    CentralResult r = train_centralized(cfg, seeds, train, test, table, cc);
    write_lines(outcome.history_path, std::string("epoch,train_loss,test_loss,") + kMetricColumns, r.history_rows);

    const json& cj = cfg.at("classical");
    const bool normalize = cj.at("normalize_features").get<bool>();
    FeatureMatrix train_features = extract_features(r.model, train, "encoder.ckpt.json", normalize);
    const FeatureMatrix test_features = extract_features(r.model, test, "encoder.ckpt.json", normalize);
    const SvmModel svm = svm_fit(train_features, cj.at("svm_lambda").get<double>(), cj.at("svm_iterations").get<int>(),
                                 seeds.at("svm").get<std::uint64_t>(), cj.at("svm_average").get<bool>());
    const KnnModel knn = knn_fit(std::move(train_features), cj.at("knn_k").get<int>());
    const int k = table.num_classes();
    const MetricsReport clip_head = evaluate_anchor_head(r.model, test, table, cc);
    const MetricsReport knn_head = report(confusion(test.labels, knn_predict(knn, test_features.features), k));
    const MetricsReport svm_head = report(confusion(test.labels, svm_predict(svm, test_features.features), k));

    write_json(to_checkpoint(r.model), outcome.output_dir / "encoder.ckpt.json");
    write_json(to_checkpoint(knn), outcome.output_dir / "knn.ckpt.json");
    write_json(to_checkpoint(svm), outcome.output_dir / "svm.ckpt.json");
    artifacts["checkpoints"] = {{"encoder", "encoder.ckpt.json"}, {"knn", "knn.ckpt.json"}, {"svm", "svm.ckpt.json"}};
    summary["results"] = {{"train_size", train.size()},
                          {"test_size", test.size()},
                          {"test_dataset", test.name},
                          {"heads", {{"clip", to_json(clip_head)}, {"knn", to_json(knn_head)}, {"svm", to_json(svm_head)}}}};
  }

  summary["artifacts"] = artifacts;
  timing["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  summary["timing"] = timing;
  write_json(summary, outcome.summary_path);
  outcome.summary = std::move(summary);
  return outcome;
}

json without_timing(json summary) {
  summary.erase("timing");
  return summary;
}

namespace {

void metrics_row(std::ostringstream& os, const std::string& label, const json& m) {
  os << "  " << std::left << std::setw(10) << label << std::right << std::fixed << std::setprecision(4);
  for (const char* key : {"acc", "bacc", "precision_weighted", "recall_weighted", "f1_weighted", "avg"}) {
    os << std::setw(10) << m.at(key).get<double>();
  }
  os << '\n';
}

void metrics_header(std::ostringstream& os) {
  os << "  " << std::left << std::setw(10) << "" << std::right;
  for (const char* h : {"ACC", "BACC", "PRE", "REC", "F1", "AVG"}) os << std::setw(10) << h;
  os << '\n';
}

}  // namespace

std::string format_report(const json& summary) {
  std::ostringstream os;
  try {
    const json& cfg = summary.at("config");
    const std::string task = cfg.at("task").get<std::string>();
    os << "task       " << task << '\n';
    os << "seed       " << cfg.at("seed").get<std::uint64_t>() << '\n';
    os << "optimizer  " << cfg.at("optimizer").at("kind").get<std::string>() << " (lr "
       << cfg.at("optimizer").at("lr").get<double>() << ", wd " << cfg.at("optimizer").at("weight_decay").get<double>()
       << ")\n";
    os << "tau        " << cfg.at("contrastive").at("temperature").get<double>() << '\n';
    if (!summary.at("overrides").empty()) os << "overrides  " << summary.at("overrides").dump() << '\n';
    const json& res = summary.at("results");
    os << '\n';
    metrics_header(os);
    if (task == "multimodal") {
      metrics_row(os, "test", res.at("metrics"));
    } else if (task == "federated") {
      const json& f = cfg.at("federation");
      os.unsetf(std::ios::floatfield);
      os << "  strategy " << f.at("strategy").get<std::string>() << ", " << f.at("clients").get<int>() << " clients, "
         << f.at("rounds").get<int>() << " rounds\n";
      for (const auto& c : res.at("clients")) {
        metrics_row(os, "client " + std::to_string(c.at("client").get<int>()), c.at("metrics"));
      }
      metrics_row(os, "pooled", res.at("metrics"));
      os << "  mean test loss " << std::setprecision(6) << res.at("mean_test_loss").get<double>() << '\n';
    } else {
      for (const char* head : {"clip", "knn", "svm"}) metrics_row(os, head, res.at("heads").at(head));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("not a run summary: ") + e.what());
  }
  return os.str();
}

}  // namespace fedclip
