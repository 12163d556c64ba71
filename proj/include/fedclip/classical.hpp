#pragma once

#include "fedclip/data.hpp"
#include "fedclip/models.hpp"
#include "fedclip/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedclip {

/// Encoder outputs used as inputs to a classical classifier.
struct FeatureMatrix {
  Matrix features;  // n × D
  std::vector<int> labels;
  int num_classes = 0;
  std::string source;
};

/// Final-layer embeddings of every sample, unnormalized unless asked.
FeatureMatrix extract_features(const EncoderModel& model, const Dataset& data,
                               std::string source = {}, bool normalize = false);

inline constexpr int kDefaultKnnK = 5;

struct KnnModel {
  int k = kDefaultKnnK;
  FeatureMatrix stored;
};

KnnModel knn_fit(FeatureMatrix features, int k = kDefaultKnnK);

/// Euclidean k-NN majority vote. Neighbours are ranked by (distance, label);
/// vote ties go to the class with the smaller summed distance, then the lower
/// class index. The result does not depend on storage order.
std::vector<int> knn_predict(const KnnModel& model, const Matrix& queries);

inline constexpr double kDefaultSvmLambda = 1e-4;
inline constexpr int kDefaultSvmIterations = 50000;

/// One-vs-rest linear SVMs, decision value w_c·x + b_c.
struct SvmModel {
  Matrix weights;  // K × D
  Vector biases;   // K
  double lambda = kDefaultSvmLambda;
  int iterations = kDefaultSvmIterations;
};

/// Stochastic subgradient descent on the regularized hinge loss
/// (λ/2)|w|² + mean max(0, 1 - y w·x), step 1/(λt), with projection onto the
/// ball of radius 1/sqrt(λ). The bias is learned as the weight of a constant
/// feature. With `average` the returned weights are the mean of the second
/// half of the iterates.
SvmModel svm_fit(const FeatureMatrix& features, double lambda = kDefaultSvmLambda,
                 int iterations = kDefaultSvmIterations, std::uint64_t seed = 0, bool average = false);

Matrix svm_decision_values(const SvmModel& model, const Matrix& queries);
std::vector<int> svm_predict(const SvmModel& model, const Matrix& queries);

}  // namespace fedclip
