#include "rgpssm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rgpssm::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd load_numeric_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_numeric_table: cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // strip comments and normalize commas to spaces
    const size_t hash = line.find_first_of("#%");
    if (hash != std::string::npos) line.erase(hash);
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("load_numeric_table: non-numeric value '" + tok +
                                 "' at line " + std::to_string(line_no) + " of " + path);
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("load_numeric_table: ragged row at line " +
                               std::to_string(line_no) + " of " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_numeric_table: no data in " + path);

  MatrixXd table(rows.size(), rows.front().size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

SisoDataset load_daisy(const std::string& path, const std::vector<int>& input_cols,
                       int output_col) {
  const MatrixXd table = load_numeric_table(path);
  for (int c : input_cols)
    if (c < 0 || c >= table.cols())
      throw std::runtime_error("load_daisy: input column " + std::to_string(c) +
                               " missing (" + std::to_string(table.cols()) + " columns)");
  if (output_col < 0 || output_col >= table.cols())
    throw std::runtime_error("load_daisy: output column " + std::to_string(output_col) +
                             " missing (" + std::to_string(table.cols()) + " columns)");
  SisoDataset out;
  out.inputs.resize(table.rows(), static_cast<Eigen::Index>(input_cols.size()));
  for (size_t i = 0; i < input_cols.size(); ++i)
    out.inputs.col(static_cast<Eigen::Index>(i)) = table.col(input_cols[i]);
  out.outputs = table.col(output_col);
  return out;
}

Scaler fit_scaler(const MatrixXd& train_rows) {
  Scaler s;
  const Eigen::Index n = train_rows.rows();
  s.offset = train_rows.colwise().mean();
  s.scale.resize(train_rows.cols());
  for (Eigen::Index c = 0; c < train_rows.cols(); ++c) {
    const double var =
        (train_rows.col(c).array() - s.offset(c)).square().sum() / std::max<Eigen::Index>(n, 1);
    const double sd = std::sqrt(var);
    if (sd > 0.0) {
      s.scale(c) = sd;
    } else {
      s.scale(c) = 1.0;
      s.degenerate_channels.push_back(static_cast<int>(c));
    }
  }
  return s;
}

MatrixXd Scaler::apply(const MatrixXd& rows) const {
  return (rows.rowwise() - offset.transpose()).array().rowwise() /
         scale.transpose().array();
}

MatrixXd Scaler::invert(const MatrixXd& rows) const {
  return (rows.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
         offset.transpose();
}

VectorXd Scaler::apply_col(const VectorXd& col, int channel) const {
  return (col.array() - offset(channel)) / scale(channel);
}

VectorXd Scaler::invert_col(const VectorXd& col, int channel) const {
  return col.array() * scale(channel) + offset(channel);
}

double rmse(const MatrixXd& pred, const MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("rmse: shape mismatch");
  if (pred.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((pred - truth).array().square().mean());
}

double rmse(const VectorXd& pred, const VectorXd& truth) {
  return rmse(MatrixXd(pred), MatrixXd(truth));
}

}  // namespace rgpssm::bench
