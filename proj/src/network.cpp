#include "nflreach/network.hpp"

#include <fstream>

namespace nflreach {

NeuralNetwork::NeuralNetwork(std::vector<Layer> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty())
    throw ConfigError("network: needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.W.rows() == 0 || l.W.cols() == 0)
      throw ConfigError("network layer " + std::to_string(i) +
                        ": empty weight matrix");
    if (l.b.size() != l.W.rows())
      throw ConfigError("network layer " + std::to_string(i) +
                        ": bias size does not match weight rows");
    if (!l.W.allFinite() || !l.b.allFinite())
      throw ConfigError("network layer " + std::to_string(i) +
                        ": non-finite weights");
    if (i > 0 && l.W.cols() != layers_[i - 1].W.rows())
      throw ConfigError("network layer " + std::to_string(i) +
                        ": input dim " + std::to_string(l.W.cols()) +
                        " does not chain with previous output dim " +
                        std::to_string(layers_[i - 1].W.rows()));
  }
  if (layers_.back().act != Activation::Linear)
    throw ConfigError("network: final layer activation must be linear");
}

Eigen::VectorXd NeuralNetwork::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim())
    throw ConfigError("network: input dimension mismatch");
  Eigen::VectorXd z = x;
  for (const auto& l : layers_) {
    z = l.W * z + l.b;
    if (l.act == Activation::Relu)
      z = z.cwiseMax(0.0);
  }
  return z;
}

NeuralNetwork NeuralNetwork::identity(Eigen::Index n) {
  Layer l;
  l.W = Eigen::MatrixXd::Identity(n, n);
  l.b = Eigen::VectorXd::Zero(n);
  l.act = Activation::Linear;
  return NeuralNetwork({l});
}

nlohmann::json network_to_json(const NeuralNetwork& nn) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : nn.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < l.W.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < l.W.cols(); ++j)
        row.push_back(l.W(i, j));
      w.push_back(std::move(row));
    }
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index i = 0; i < l.b.size(); ++i)
      b.push_back(l.b(i));
    layers.push_back({{"weights", std::move(w)},
                      {"bias", std::move(b)},
                      {"activation",
                       l.act == Activation::Relu ? "relu" : "linear"}});
  }
  return nlohmann::json{{"layers", std::move(layers)}};
}

NeuralNetwork network_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array())
    throw ConfigError("network json: expected object with a 'layers' array");
  std::vector<Layer> layers;
  std::size_t idx = 0;
  for (const auto& lj : j["layers"]) {
    Layer l;
    const std::string where = "network layer " + std::to_string(idx);
    if (!lj.contains("weights") || !lj.contains("bias") ||
        !lj.contains("activation"))
      throw ConfigError(where + ": missing weights/bias/activation");
    const auto& w = lj["weights"];
    if (!w.is_array() || w.empty())
      throw ConfigError(where + ": weights must be a non-empty matrix");
    const std::size_t rows = w.size();
    const std::size_t cols = w[0].size();
    l.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      if (!w[i].is_array() || w[i].size() != cols)
        throw ConfigError(where + ": ragged weight row " + std::to_string(i));
      for (std::size_t jj = 0; jj < cols; ++jj)
        l.W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) =
            w[i][jj].get<double>();
    }
    const auto& b = lj["bias"];
    l.b.resize(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i)
      l.b(static_cast<Eigen::Index>(i)) = b[i].get<double>();
    const std::string act = lj["activation"].get<std::string>();
    if (act == "relu")
      l.act = Activation::Relu;
    else if (act == "linear")
      l.act = Activation::Linear;
    else
      throw ConfigError(where + ": unknown activation '" + act + "'");
    layers.push_back(std::move(l));
    ++idx;
  }
  return NeuralNetwork(std::move(layers));
}

NeuralNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open network file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("network file " + path.string() +
                      " is not valid JSON: " + e.what());
  }
  return network_from_json(j);
}

void save_network(const NeuralNetwork& nn, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write network file " + path.string());
  out << network_to_json(nn).dump(1) << "\n";
}

} // namespace nflreach
