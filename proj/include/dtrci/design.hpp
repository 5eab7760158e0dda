#pragma once

#include "dtrci/dataio.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace dtrci {

// Stage-t rows for the units whose stage t is present.
struct StageMatrices {
  std::vector<int> units;      // unit index of each row
  std::vector<int> next_row;   // row of the same unit at stage t+1, or -1
  Eigen::MatrixXd B;           // observed design rows
  Eigen::VectorXd y;           // observed rewards
  Eigen::MatrixXd code_rows;   // row r*K + (a-1) is B_t(h_r, a)
  int K = 1;
  int main_dim = 0;

  int rows() const { return static_cast<int>(units.size()); }
  int dim() const { return static_cast<int>(B.cols()); }
  auto codes(int r) const { return code_rows.middleRows(static_cast<Eigen::Index>(r) * K, K); }
};

// Every stage design of a dataset evaluated once; bootstrap replicates are
// row selections of it.
class Design {
 public:
  static Design build(const Dataset& ds);

  // Unit i of the result is unit idx[i] of this design.
  Design select(std::span<const int> idx) const;

  int n() const { return n_; }
  int n_stages() const { return static_cast<int>(stages_.size()); }
  const StageMatrices& stage(int t) const { return stages_.at(t - 1); }
  const DesignSpec& spec() const { return spec_; }

 private:
  int n_ = 0;
  DesignSpec spec_;
  std::vector<StageMatrices> stages_;
  std::vector<std::vector<int>> row_of_;  // [t-1][unit] -> row or -1
};

}  // namespace dtrci
