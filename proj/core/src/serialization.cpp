#include "rgpssm/serialization.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

json vec_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vec_from_json(const json& a) {
  VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

std::string belief_to_json(const AugmentedBelief& b) {
  json j;
  j["n_x"] = b.n_x;
  j["n_f"] = b.output_dim();
  j["n_in"] = b.input_dim();
  json z = json::array();
  for (const auto& zi : b.inducing_inputs)
    for (Eigen::Index k = 0; k < zi.size(); ++k) z.push_back(zi(k));
  j["Z"] = z;
  j["xi"] = vec_to_json(b.mean);
  json tri = json::array();
  for (int r = 0; r < b.chol.rows(); ++r)
    for (int c = 0; c <= r; ++c) tri.push_back(b.chol(r, c));
  j["L"] = tri;
  j["hyperparameters"] = {
      {"log_length_scales", vec_to_json(b.hyper.log_length_scales)},
      {"log_signal_variances", vec_to_json(b.hyper.log_signal_variances)},
  };
  return j.dump();
}

AugmentedBelief belief_from_json(const std::string& text) {
  const json j = json::parse(text);
  AugmentedBelief b;
  b.n_x = j.at("n_x").get<int>();
  const int n_f = j.at("n_f").get<int>();
  const int n_in = j.at("n_in").get<int>();
  b.hyper.log_length_scales = vec_from_json(j.at("hyperparameters").at("log_length_scales"));
  b.hyper.log_signal_variances = vec_from_json(j.at("hyperparameters").at("log_signal_variances"));
  if (b.hyper.input_dim() != n_in || b.hyper.output_dim() != n_f)
    throw std::invalid_argument("belief_from_json: inconsistent dimensions");
  const json& z = j.at("Z");
  if (z.size() % n_in != 0)
    throw std::invalid_argument("belief_from_json: Z length not a multiple of n_in");
  for (size_t i = 0; i < z.size(); i += n_in) {
    VectorXd zi(n_in);
    for (int k = 0; k < n_in; ++k) zi(k) = z[i + k].get<double>();
    b.inducing_inputs.push_back(zi);
  }
  b.mean = vec_from_json(j.at("xi"));
  const int n = b.dim();
  if (b.mean.size() != n)
    throw std::invalid_argument("belief_from_json: mean length mismatch");
  const json& tri = j.at("L");
  if (tri.size() != static_cast<size_t>(n) * (n + 1) / 2)
    throw std::invalid_argument("belief_from_json: triangle length mismatch");
  b.chol = MatrixXd::Zero(n, n);
  size_t idx = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) b.chol(r, c) = tri[idx++].get<double>();
  return b;
}

void save_belief(const AugmentedBelief& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_belief: cannot open " + path);
  out << belief_to_json(b) << "\n";
}

AugmentedBelief load_belief(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_belief: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return belief_from_json(text);
}

}  // namespace rgpssm
