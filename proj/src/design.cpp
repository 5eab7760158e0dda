#include "dtrci/design.hpp"

#include "dtrci/errors.hpp"

namespace dtrci {

Design Design::build(const Dataset& ds) {
  ds.validate();
  Design d;
  d.n_ = ds.n();
  d.spec_ = ds.spec;
  const int T = ds.spec.n_stages();
  d.stages_.resize(T);
  d.row_of_.assign(T, std::vector<int>(d.n_, -1));
  for (int t = 1; t <= T; ++t) {
    const StageSpec& st = ds.spec.stage(t);
    StageMatrices& sm = d.stages_[t - 1];
    sm.K = st.n_treatments();
    sm.main_dim = st.main_dim();
    for (int i = 0; i < d.n_; ++i)
      if (ds.trajectories[i].stages[t - 1].present()) {
        d.row_of_[t - 1][i] = static_cast<int>(sm.units.size());
        sm.units.push_back(i);
      }
    const int rows = sm.rows();
    sm.B.resize(rows, st.dim());
    sm.y.resize(rows);
    sm.code_rows.resize(static_cast<Eigen::Index>(rows) * sm.K, st.dim());
    for (int r = 0; r < rows; ++r) {
      const Trajectory& tr = ds.trajectories[sm.units[r]];
      sm.code_rows.middleRows(static_cast<Eigen::Index>(r) * sm.K, sm.K) = code_rows(ds.spec, tr, t);
      sm.B.row(r) = sm.code_rows.row(static_cast<Eigen::Index>(r) * sm.K + *tr.stages[t - 1].action - 1);
      sm.y[r] = tr.stages[t - 1].reward;
    }
  }
  for (int t = 1; t <= T; ++t) {
    StageMatrices& sm = d.stages_[t - 1];
    sm.next_row.assign(sm.rows(), -1);
    if (t < T)
      for (int r = 0; r < sm.rows(); ++r) sm.next_row[r] = d.row_of_[t][sm.units[r]];
  }
  return d;
}

Design Design::select(std::span<const int> idx) const {
  Design d;
  d.n_ = static_cast<int>(idx.size());
  d.spec_ = spec_;
  const int T = n_stages();
  d.stages_.resize(T);
  d.row_of_.assign(T, std::vector<int>(d.n_, -1));
  for (int t = 1; t <= T; ++t) {
    const StageMatrices& src = stages_[t - 1];
    StageMatrices& sm = d.stages_[t - 1];
    sm.K = src.K;
    sm.main_dim = src.main_dim;
    std::vector<int> src_rows;
    for (int i = 0; i < d.n_; ++i) {
      const int u = idx[i];
      if (u < 0 || u >= n_) throw DataError("resample index out of range");
      const int r = row_of_[t - 1][u];
      if (r < 0) continue;
      d.row_of_[t - 1][i] = static_cast<int>(sm.units.size());
      sm.units.push_back(i);
      src_rows.push_back(r);
    }
    const int rows = sm.rows();
    sm.B.resize(rows, src.dim());
    sm.y.resize(rows);
    sm.code_rows.resize(static_cast<Eigen::Index>(rows) * sm.K, src.dim());
    for (int r = 0; r < rows; ++r) {
      sm.B.row(r) = src.B.row(src_rows[r]);
      sm.y[r] = src.y[src_rows[r]];
      sm.code_rows.middleRows(static_cast<Eigen::Index>(r) * sm.K, sm.K) = src.codes(src_rows[r]);
    }
  }
  for (int t = 1; t <= T; ++t) {
    StageMatrices& sm = d.stages_[t - 1];
    sm.next_row.assign(sm.rows(), -1);
    if (t < T)
      for (int r = 0; r < sm.rows(); ++r) sm.next_row[r] = d.row_of_[t][sm.units[r]];
  }
  return d;
}

}  // namespace dtrci
