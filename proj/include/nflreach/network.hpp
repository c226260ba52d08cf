#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "nflreach/errors.hpp"

namespace nflreach {

enum class Activation { Relu, Linear };

struct Layer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Activation act = Activation::Linear;
};

// Feed-forward network with elementwise ReLU hidden activations and a linear
// output layer.
class NeuralNetwork {
public:
  explicit NeuralNetwork(std::vector<Layer> layers);

  Eigen::Index input_dim() const { return layers_.front().W.cols(); }
  Eigen::Index output_dim() const { return layers_.back().W.rows(); }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;

  static NeuralNetwork identity(Eigen::Index n);

private:
  std::vector<Layer> layers_;
};

nlohmann::json network_to_json(const NeuralNetwork& nn);
NeuralNetwork network_from_json(const nlohmann::json& j);

NeuralNetwork load_network(const std::filesystem::path& path);
void save_network(const NeuralNetwork& nn, const std::filesystem::path& path);

} // namespace nflreach
