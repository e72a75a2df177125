#pragma once

// Eigenbasis of the hopping matrix aligned with the sink site.
//
// Inside each degenerate eigenspace the symmetric eigensolver returns an
// arbitrary orthonormal basis. We rotate every cluster with a Householder
// reflection so that at most one of its vectors touches the sink; the others
// have exactly zero sink amplitude. Dark counts and the coherent bound are
// evaluated in this basis.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "enaqt/error.hpp"
#include "enaqt/lattice.hpp"

namespace enaqt {

struct SpectralOptions {
  double cluster_tol = 1e-9;   ///< relative eigenvalue gap that separates clusters
  double overlap_tol = 1e-12;  ///< |<alpha|s>|^2 below this counts as dark
};

class SinkAlignedBasis {
 public:
  SinkAlignedBasis(const HoppingMatrix& hopping, int sink, SpectralOptions opt = {})
      : sink_(sink), opt_(opt) {
    const Eigen::Index n = hopping.rows();
    if (n < 1 || hopping.cols() != n) throw InvalidSpec("hopping matrix must be square");
    if (sink < 0 || sink >= n) throw InvalidSpec("sink index out of range");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hopping);
    if (es.info() != Eigen::Success) throw SolverError("symmetric eigensolver failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
    align();
  }

  [[nodiscard]] Eigen::Index size() const { return values_.size(); }
  [[nodiscard]] int sink() const { return sink_; }
  [[nodiscard]] const Eigen::VectorXd& values() const { return values_; }
  /// Columns are the eigenvectors |alpha>.
  [[nodiscard]] const Eigen::MatrixXd& vectors() const { return vectors_; }
  /// |<alpha|s>|^2 per eigenvector.
  [[nodiscard]] const Eigen::VectorXd& sink_overlaps() const { return overlap_; }
  /// [begin, end) index ranges of degenerate clusters.
  [[nodiscard]] const std::vector<std::pair<Eigen::Index, Eigen::Index>>& clusters() const {
    return clusters_;
  }

  [[nodiscard]] bool is_dark(Eigen::Index a) const { return overlap_(a) < opt_.overlap_tol; }

  [[nodiscard]] int dark_count() const {
    int c = 0;
    for (Eigen::Index a = 0; a < size(); ++a) c += is_dark(a) ? 1 : 0;
    return c;
  }

  [[nodiscard]] std::vector<Eigen::Index> bright_indices() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index a = 0; a < size(); ++a)
      if (!is_dark(a)) out.push_back(a);
    return out;
  }
  [[nodiscard]] std::vector<Eigen::Index> dark_indices() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index a = 0; a < size(); ++a)
      if (is_dark(a)) out.push_back(a);
    return out;
  }

 private:
  void align() {
    const Eigen::Index n = values_.size();
    const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
    const double tol = opt_.cluster_tol * scale;
    Eigen::Index begin = 0;
    for (Eigen::Index i = 1; i <= n; ++i) {
      if (i == n || values_(i) - values_(i - 1) > tol) {
        clusters_.emplace_back(begin, i);
        begin = i;
      }
    }
    for (auto [b, e] : clusters_) {
      const Eigen::Index k = e - b;
      if (k < 2) continue;
      // Equalize the eigenvalues of the cluster to their mean, then rotate.
      const double mean = values_.segment(b, k).mean();
      values_.segment(b, k).setConstant(mean);
      Eigen::VectorXd c = vectors_.middleCols(b, k).row(sink_).transpose();
      const double norm = c.norm();
      if (norm == 0.0) continue;
      // Householder H = 1 - 2 w w^T / (w^T w) maps c to -sign(c0) |c| e_0.
      Eigen::VectorXd w = c;
      w(0) += (c(0) >= 0 ? 1.0 : -1.0) * norm;
      const double ww = w.squaredNorm();
      if (ww == 0.0) continue;
      Eigen::MatrixXd block = vectors_.middleCols(b, k);
      block -= (2.0 / ww) * (block * w) * w.transpose();
      block.row(sink_).tail(k - 1).setZero();
      vectors_.middleCols(b, k) = block;
    }
    overlap_ = vectors_.row(sink_).transpose().cwiseAbs2();
  }

  int sink_;
  SpectralOptions opt_;
  Eigen::VectorXd values_;
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd overlap_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> clusters_;
};

}  // namespace enaqt
