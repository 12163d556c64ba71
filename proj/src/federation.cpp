#include "fedclip/federation.hpp"

#include "fedclip/errors.hpp"
#include "fedclip/seeding.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <future>
#include <numeric>

namespace fedclip {

std::string to_string(Strategy s) { return s == Strategy::FedAvg ? "fedavg" : "fedprox"; }

Strategy parse_strategy(const std::string& name) {
  if (name == "fedavg") return Strategy::FedAvg;
  if (name == "fedprox") return Strategy::FedProx;
  throw ConfigError("unknown strategy '" + name + "' (expected fedavg or fedprox)");
}

void validate(const FederationConfig& cfg) {
  if (cfg.num_clients < 1) throw ConfigError("federation.clients must be >= 1");
  if (cfg.rounds < 1) throw ConfigError("federation.rounds must be >= 1");
  if (cfg.local_epochs < 1) throw ConfigError("federation.local_epochs must be >= 1");
  if (!(cfg.mu >= 0.0)) throw ConfigError("federation.mu must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  validate(cfg.optimizer);
}

std::vector<ClientState> make_clients(const FederatedSplit& split) {
  std::vector<ClientState> clients;
  for (std::size_t i = 0; i < split.clients.size(); ++i) {
    ClientState c;
    c.client_id = static_cast<int>(i);
    c.train = split.clients[i].train;
    c.val = split.clients[i].val;
    c.test = split.clients[i].test;
    clients.push_back(std::move(c));
  }
  return clients;
}

LocalResult local_train(ClientState& client, const ParameterSet& global, const FederationConfig& cfg,
                        const ModelContext& ctx, int round) {
  if (client.train.size() == 0) {
    throw ConfigError("client " + std::to_string(client.client_id) + " has an empty train split");
  }
  if (cfg.local_epochs < 1) throw ConfigError("federation.local_epochs must be >= 1");

  EncoderModel model = ctx.architecture;
  set_parameters(model, global);
  client.params = global;
  if (!cfg.persist_optimizer_state) client.optimizer_state = OptimizerState{};

  const LossSetup loss{cfg.loss_kind, &ctx.table, ctx.contrastive};
  const ProximalTerm prox{&global, cfg.effective_mu()};
  const ProximalTerm* prox_ptr = prox.mu != 0.0 ? &prox : nullptr;
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(client.client_id),
                      static_cast<std::uint64_t>(round)));

  LocalResult result;
  for (int e = 0; e < cfg.local_epochs; ++e) {
    const EpochStats stats =
        train_epoch(model, cfg.optimizer, client.optimizer_state, client.train, cfg.batch_size, rng, loss, prox_ptr);
    result.epoch_losses.push_back(stats.mean_loss);
    result.steps += stats.steps;
  }
  client.params = parameters(model);
  result.params = client.params;
  return result;
}

ParameterSet aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw AggregationError("aggregate: no client updates");
  std::vector<const ClientUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  const ParameterSet& ref = sorted.front()->params;
  for (const ClientUpdate* u : sorted) {
    if (!same_layout(ref, u->params)) {
      throw AggregationError("aggregate: parameters of client " + std::to_string(u->client_id) +
                             " do not match the shape of client " + std::to_string(sorted.front()->client_id));
    }
  }
  ParameterSet out = ref;
  for (std::size_t k = 0; k < out.size(); ++k) {
    Matrix acc = sorted.front()->params.values[k];
    for (std::size_t i = 1; i < sorted.size(); ++i) acc += sorted[i]->params.values[k];
    out.values[k] = acc / static_cast<double>(sorted.size());
  }
  return out;
}

ParameterSet aggregate(std::span<const ParameterSet> snapshots) {
  std::vector<ClientUpdate> updates;
  for (std::size_t i = 0; i < snapshots.size(); ++i) updates.push_back({static_cast<int>(i), snapshots[i]});
  return aggregate(std::span<const ClientUpdate>(updates));
}

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + 8 > bytes.size()) throw DataError("parameter payload truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

std::vector<std::uint8_t> BinaryChannel::serialize(const ParameterSet& params) const {
  std::vector<std::uint8_t> out;
  put_u64(out, params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string& name = params.names[k];
    put_u64(out, name.size());
    out.insert(out.end(), name.begin(), name.end());
    const Matrix& m = params.values[k];
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  return out;
}

ParameterSet BinaryChannel::deserialize(std::span<const std::uint8_t> bytes) const {
  std::size_t pos = 0;
  ParameterSet out;
  const std::uint64_t count = get_u64(bytes, pos);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t len = get_u64(bytes, pos);
    if (pos + len > bytes.size()) throw DataError("parameter payload truncated");
    out.names.emplace_back(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    const auto rows = static_cast<Eigen::Index>(get_u64(bytes, pos));
    const auto cols = static_cast<Eigen::Index>(get_u64(bytes, pos));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(bytes, pos));
    out.values.push_back(std::move(m));
  }
  if (pos != bytes.size()) throw DataError("parameter payload has trailing bytes");
  return out;
}

FederatedServer::FederatedServer(ParameterSet initial, std::shared_ptr<const ParameterChannel> channel)
    : global_(std::move(initial)), channel_(std::move(channel)) {}

void FederatedServer::receive(int client_id, const ParameterSet& params) {
  inbox_.push_back({client_id, channel_->transmit(params)});
}

const ParameterSet& FederatedServer::close_round() {
  for (const auto& u : inbox_) {
    if (!same_layout(u.params, global_)) {
      throw AggregationError("client " + std::to_string(u.client_id) +
                             " sent parameters that do not match the global model");
    }
  }
  global_ = aggregate(std::span<const ClientUpdate>(inbox_));
  inbox_.clear();
  ++round_;
  return global_;
}

ClientEvaluation client_evaluate(const ClientState& client, const ParameterSet& global,
                                 const ModelContext& ctx) {
  if (client.test.size() == 0) {
    throw ConfigError("client " + std::to_string(client.client_id) + " has an empty test split");
  }
  EncoderModel model = ctx.architecture;
  set_parameters(model, global);
  const Matrix emb = encode_images(model, client.test.inputs);
  const Classification cls = classify(emb, ctx.table, ctx.contrastive);
  const auto losses = anchor_sample_losses(emb, client.test.labels, ctx.table, ctx.contrastive);

  ClientEvaluation ev;
  ev.client_id = client.client_id;
  ev.confusion = confusion(client.test.labels, cls.labels, ctx.table.num_classes());
  ev.metrics = report(ev.confusion);
  ev.count = losses.size();
  ev.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  return ev;
}

GlobalEvaluation global_evaluate(const ParameterSet& global, std::span<const ClientState> clients,
                                 const ModelContext& ctx) {
  if (clients.empty()) throw ContractError("global_evaluate: no clients");
  GlobalEvaluation g;
  ConfusionMatrix pooled;
  pooled.counts = CountMatrix::Zero(ctx.table.num_classes(), ctx.table.num_classes());
  double loss_sum = 0.0;
  for (const auto& c : clients) {
    g.clients.push_back(client_evaluate(c, global, ctx));
    pooled += g.clients.back().confusion;
    loss_sum += g.clients.back().mean_loss;
  }
  g.overall = report(pooled);
  g.mean_test_loss = loss_sum / static_cast<double>(clients.size());
  return g;
}

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_report(const MetricsReport& a, const MetricsReport& b) {
  return same_bits(a.acc, b.acc) && same_bits(a.bacc, b.bacc) &&
         same_bits(a.precision_weighted, b.precision_weighted) &&
         same_bits(a.recall_weighted, b.recall_weighted) && same_bits(a.f1_weighted, b.f1_weighted) &&
         same_bits(a.avg, b.avg) && a.support == b.support;
}

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), same_bits);
}

}  // namespace

bool identical_histories(const std::vector<RoundRecord>& a, const std::vector<RoundRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    const RoundRecord& x = a[r];
    const RoundRecord& y = b[r];
    if (x.round != y.round || !same_bits(x.mean_test_loss, y.mean_test_loss) ||
        !same_report(x.overall, y.overall) || !bit_identical(x.global_params, y.global_params) ||
        !same_values(x.client_test_losses, y.client_test_losses) ||
        x.client_train_losses.size() != y.client_train_losses.size() ||
        x.client_metrics.size() != y.client_metrics.size()) {
      return false;
    }
    for (std::size_t c = 0; c < x.client_train_losses.size(); ++c) {
      if (!same_values(x.client_train_losses[c], y.client_train_losses[c])) return false;
    }
    for (std::size_t c = 0; c < x.client_metrics.size(); ++c) {
      if (!same_report(x.client_metrics[c], y.client_metrics[c])) return false;
    }
  }
  return true;
}

FederationResult run_federation(std::vector<ClientState>& clients, const FederationConfig& cfg,
                                const ModelContext& ctx) {
  validate(cfg);
  if (clients.empty()) throw ConfigError("run_federation: no clients");
  if (static_cast<int>(clients.size()) != cfg.num_clients) {
    throw ConfigError("run_federation: configured for " + std::to_string(cfg.num_clients) + " clients, got " +
                      std::to_string(clients.size()));
  }

  FederatedServer server(parameters(ctx.architecture));
  FederationResult result;
  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto started = std::chrono::steady_clock::now();
    RoundRecord record;
    record.round = round;

    std::vector<LocalResult> local(clients.size());
    auto train_one = [&](std::size_t i) {
      try {
        const ParameterSet received = server.broadcast();
        local[i] = local_train(clients[i], received, cfg, ctx, round);
      } catch (const NumericError& e) {
        throw NumericError("round " + std::to_string(round) + ", client " +
                           std::to_string(clients[i].client_id) + ": " + e.what());
      } catch (const Error& e) {
        throw Error("round " + std::to_string(round) + ", client " + std::to_string(clients[i].client_id) +
                    ": " + e.what());
      }
    };
    if (cfg.parallel && clients.size() > 1) {
      std::vector<std::future<void>> jobs;
      for (std::size_t i = 0; i < clients.size(); ++i) jobs.push_back(std::async(std::launch::async, train_one, i));
      for (auto& j : jobs) j.get();
    } else {
      for (std::size_t i = 0; i < clients.size(); ++i) train_one(i);
    }

    for (std::size_t i = 0; i < clients.size(); ++i) {
      server.receive(clients[i].client_id, local[i].params);
      record.client_train_losses.push_back(local[i].epoch_losses);
    }
    try {
      server.close_round();
    } catch (const Error& e) {
      throw AggregationError("round " + std::to_string(round) + ": " + e.what());
    }

    const GlobalEvaluation eval = global_evaluate(server.global(), clients, ctx);
    for (const auto& ce : eval.clients) {
      record.client_metrics.push_back(ce.metrics);
      record.client_test_losses.push_back(ce.mean_loss);
    }
    record.overall = eval.overall;
    record.mean_test_loss = eval.mean_test_loss;
    record.global_params = server.global();
    record.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(std::move(record));
  }
  result.final_params = server.global();
  return result;
}

}  // namespace fedclip
