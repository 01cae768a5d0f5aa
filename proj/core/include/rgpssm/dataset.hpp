#pragma once

#include <string>
#include <vector>
#include <Eigen/Dense>

namespace rgpssm::bench {

/// Numeric text table: whitespace- or comma-delimited rows, '#'/'%' comment
/// lines skipped. Errors carry the 1-based line number.
Eigen::MatrixXd load_numeric_table(const std::string& path);

struct SisoDataset {
  Eigen::MatrixXd inputs;   ///< one row per sample
  Eigen::VectorXd outputs;
};

/// Column selection over a numeric table, for the identification benchmarks.
SisoDataset load_daisy(const std::string& path, const std::vector<int>& input_cols,
                       int output_col);

/// Per-channel affine scaler fit on training data; zero-variance channels get
/// scale 1 (with a warning flag) so the transform stays invertible.
struct Scaler {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;
  std::vector<int> degenerate_channels;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply_col(const Eigen::VectorXd& col, int channel) const;
  Eigen::VectorXd invert_col(const Eigen::VectorXd& col, int channel) const;
};

Scaler fit_scaler(const Eigen::MatrixXd& train_rows);

/// Root mean squared error over all channels and steps.
double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

}  // namespace rgpssm::bench
