#pragma once

#include "fedclip/contrastive.hpp"
#include "fedclip/data.hpp"
#include "fedclip/metrics.hpp"
#include "fedclip/models.hpp"
#include "fedclip/optim.hpp"
#include "fedclip/training.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fedclip {

enum class Strategy { FedAvg, FedProx };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

inline constexpr double kDefaultProximalMu = 0.01;

struct FederationConfig {
  int num_clients = 3;
  int rounds = 1;
  int local_epochs = 1;
  Strategy strategy = Strategy::FedAvg;
  double mu = kDefaultProximalMu;
  OptimizerSpec optimizer = make_optimizer(OptimizerKind::SGD);
  int batch_size = 32;
  LossKind loss_kind = LossKind::Contrastive;
  std::uint64_t seed = 0;
  /// Train the clients of a round on separate threads.
  bool parallel = false;
  /// Keep each client's optimizer slots across rounds instead of starting
  /// every round with a fresh optimizer.
  bool persist_optimizer_state = false;

  /// mu for FedProx, 0 for FedAvg.
  double effective_mu() const { return strategy == Strategy::FedProx ? mu : 0.0; }
};

void validate(const FederationConfig& cfg);

/// Shared, read-only pieces every participant agrees on: the architecture
/// (whose weights are the round-0 global model), the frozen class anchors and
/// the temperature.
struct ModelContext {
  EncoderModel architecture;
  TextEmbeddingTable table;
  ContrastiveConfig contrastive;
};

struct ClientState {
  int client_id = 0;
  Dataset train;
  Dataset val;
  Dataset test;
  ParameterSet params;
  OptimizerState optimizer_state;
};

std::vector<ClientState> make_clients(const FederatedSplit& split);

struct LocalResult {
  ParameterSet params;
  std::vector<double> epoch_losses;
  std::int64_t steps = 0;
};

/// Starts from `global`, runs `cfg.local_epochs` epochs on the client's
/// train split (adding the proximal pull toward `global` under FedProx) and
/// leaves the result in `client.params`. The minibatch order is drawn from a
/// stream keyed by (seed, client id, round).
LocalResult local_train(ClientState& client, const ParameterSet& global, const FederationConfig& cfg,
                        const ModelContext& ctx, int round);

/// A parameter snapshot as it arrives at the server.
struct ClientUpdate {
  int client_id = 0;
  ParameterSet params;
};

/// Equal-weight coordinatewise mean, summed in ascending client id so the
/// result does not depend on arrival order.
ParameterSet aggregate(std::span<const ClientUpdate> updates);
/// Same, treating the position in the list as the client id.
ParameterSet aggregate(std::span<const ParameterSet> snapshots);

/// Serialization boundary crossed by every parameter transfer.
class ParameterChannel {
 public:
  virtual ~ParameterChannel() = default;
  virtual std::vector<std::uint8_t> serialize(const ParameterSet& params) const = 0;
  virtual ParameterSet deserialize(std::span<const std::uint8_t> bytes) const = 0;
  ParameterSet transmit(const ParameterSet& params) const { return deserialize(serialize(params)); }
};

/// Raw little-endian doubles with names and shapes; lossless.
class BinaryChannel final : public ParameterChannel {
 public:
  std::vector<std::uint8_t> serialize(const ParameterSet& params) const override;
  ParameterSet deserialize(std::span<const std::uint8_t> bytes) const override;
};

/// Holds the global model. Accepts parameter snapshots only; it never sees
/// client data.
class FederatedServer {
 public:
  explicit FederatedServer(ParameterSet initial,
                           std::shared_ptr<const ParameterChannel> channel = std::make_shared<BinaryChannel>());

  const ParameterSet& global() const { return global_; }
  int round() const { return round_; }
  ParameterSet broadcast() const { return channel_->transmit(global_); }
  void receive(int client_id, const ParameterSet& params);
  /// Replaces the global model by the mean of the received updates.
  const ParameterSet& close_round();

 private:
  ParameterSet global_;
  std::shared_ptr<const ParameterChannel> channel_;
  std::vector<ClientUpdate> inbox_;
  int round_ = 0;
};

struct ClientEvaluation {
  int client_id = 0;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  double mean_loss = 0.0;
  std::size_t count = 0;
};

/// Client-side scoring of the global model on the client's own test split.
ClientEvaluation client_evaluate(const ClientState& client, const ParameterSet& global,
                                 const ModelContext& ctx);

struct GlobalEvaluation {
  std::vector<ClientEvaluation> clients;
  MetricsReport overall;  // pooled confusion over all clients
  double mean_test_loss = 0.0;  // (1/N) Σ_i (1/n_i) Σ_j L_ij
};

GlobalEvaluation global_evaluate(const ParameterSet& global, std::span<const ClientState> clients,
                                 const ModelContext& ctx);

struct RoundRecord {
  int round = 0;
  std::vector<std::vector<double>> client_train_losses;  // [client][epoch]
  std::vector<MetricsReport> client_metrics;
  std::vector<double> client_test_losses;
  MetricsReport overall;
  double mean_test_loss = 0.0;
  double duration_seconds = 0.0;
  ParameterSet global_params;
};

/// Equality of everything except wall-clock time, bit for bit.
bool identical_histories(const std::vector<RoundRecord>& a, const std::vector<RoundRecord>& b);

struct FederationResult {
  std::vector<RoundRecord> history;
  ParameterSet final_params;
};

FederationResult run_federation(std::vector<ClientState>& clients, const FederationConfig& cfg,
                                const ModelContext& ctx);

}  // namespace fedclip
