#include "fedclip/gradcheck_suite.hpp"

#include "fedclip/autodiff.hpp"
#include "fedclip/contrastive.hpp"
#include "fedclip/gradcheck.hpp"
#include "fedclip/models.hpp"
#include "fedclip/seeding.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <numeric>

namespace fedclip {

namespace {

constexpr double kEps = 1e-5;
constexpr double kTolerance = 1e-4;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

using Builder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

/// Worst relative error over all inputs of a graph built by `build`.
double check(const Builder& build, const std::vector<Matrix>& inputs) {
  Graph graph;
  std::vector<NodeId> leaves;
  for (const auto& m : inputs) leaves.push_back(graph.leaf(m, true));
  const GradientMap grads = graph.backward(build(graph, leaves));

  const auto f = [&](std::span<const Matrix> params) {
    Graph g;
    std::vector<NodeId> ids;
    for (const auto& m : params) ids.push_back(g.leaf(m, false));
    return g.value(build(g, ids))(0, 0);
  };
  const auto numeric = finite_difference_grad(f, inputs, kEps);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    worst = std::max(worst, relative_error(grads.at(leaves[i].index), numeric[i]));
  }
  return worst;
}

Builder encoder_loss(const EncoderModel& model, const Matrix& batch,
                     const std::function<NodeId(Graph&, NodeId)>& head) {
  // Leaves are the encoder parameters in parameters() order.
  return [&model, batch, head](Graph& g, const std::vector<NodeId>& p) {
    NodeId h = g.constant(batch);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      h = g.add_bias(g.matmul(h, p[2 * l]), p[2 * l + 1]);
      if (model.layers[l].activation == Activation::Relu) h = g.relu(h);
    }
    return head(g, h);
  };
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(unsigned long long seed) {
  Rng rng(seed);
  std::vector<GradcheckResult> out;
  const auto add = [&](std::string name, double err) { out.push_back({std::move(name), err, kTolerance}); };

  add("matmul", check([](Graph& g, const std::vector<NodeId>& x) { return g.sum(g.matmul(x[0], x[1])); },
                      {random_matrix(3, 3, rng), random_matrix(3, 3, rng)}));
  add("relu", check([](Graph& g, const std::vector<NodeId>& x) { return g.sum(g.scale(g.relu(x[0]), 1.7)); },
                    {random_matrix(4, 5, rng)}));
  const Matrix weights = random_matrix(4, 8, rng);
  add("row_normalize",
      check([weights](Graph& g, const std::vector<NodeId>& x) {
        // Weighted sum so the gradient is not trivially zero.
        return g.sum(g.matmul(g.row_normalize(x[0]), g.constant(weights.transpose())));
      }, {random_matrix(4, 8, rng)}));
  add("add_bias+transpose",
      check([](Graph& g, const std::vector<NodeId>& x) {
        return g.sum(g.relu(g.transpose(g.add_bias(x[0], x[1]))));
      }, {random_matrix(3, 4, rng), random_matrix(1, 4, rng)}));

  constexpr int kBatch = 8;
  constexpr int kInput = 6;
  constexpr int kHidden = 12;
  constexpr int kEmbed = 16;
  const std::vector<int> widths{kInput, kHidden};
  const EncoderModel model = init_encoder(widths, kEmbed, derive_seed(seed, "gradcheck-model"));
  const Matrix batch = random_matrix(kBatch, kInput, rng);
  const TextEmbeddingTable table =
      build_text_table({"alpha", "beta", "gamma"}, kDefaultPromptTemplate, kEmbed, derive_seed(seed, "text"));
  const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
  const Matrix paired = table.rows_for(labels);
  // A moderate temperature keeps the finite-difference truncation error
  // well below the tolerance.
  const ContrastiveConfig cfg{0.5};
  const ParameterSet params = parameters(model);

  add("encoder+contrastive_loss",
      check(encoder_loss(model, batch,
                         [&](Graph& g, NodeId emb) { return contrastive_loss(g, emb, paired, cfg); }),
            params.values));
  add("encoder+cross_entropy",
      check(encoder_loss(model, batch,
                         [&](Graph& g, NodeId emb) { return anchor_cross_entropy(g, emb, table, labels, cfg); }),
            params.values));
  add("encoder+contrastive_loss(tau=0.07)",
      check(encoder_loss(model, batch,
                         [&](Graph& g, NodeId emb) {
                           return contrastive_loss(g, emb, paired, ContrastiveConfig{kDefaultTemperature});
                         }),
            params.values));
  return out;
}

bool report_gradcheck(const std::vector<GradcheckResult>& results, std::ostream& out) {
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed() ? "PASS " : "FAIL ") << std::left << std::setw(36) << r.name << " rel.err "
        << std::scientific << std::setprecision(3) << r.relative_error << " (< " << r.tolerance << ")\n";
    ok = ok && r.passed();
  }
  out << std::defaultfloat;
  return ok;
}

}  // namespace fedclip
