#include "dfd/projection.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dfd/error.hpp"

namespace dfd {

Projection project_2d(const Matrix& h) {
  const std::size_t n = h.rows(), d = h.cols();
  if (n < 2) throw ValidationError("project_2d: need at least two rows");
  if (d < 1) throw ValidationError("project_2d: need at least one column");

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = h(i, j);
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("project_2d: eigendecomposition failed");

  Projection p;
  p.coords = Matrix(n, 2);
  p.components = Matrix(d, 2);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = std::max(values(d - 1), 0.0);
  int kept = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    if (c >= d) break;
    const Eigen::Index idx = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd axis = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    for (std::size_t j = 0; j < d; ++j) p.components(j, c) = axis(static_cast<Eigen::Index>(j));
    if (!(top > 0.0) || values(idx) <= 1e-12 * top) continue;
    ++kept;
    const Eigen::VectorXd proj = x * axis;
    for (std::size_t i = 0; i < n; ++i) p.coords(i, c) = proj(static_cast<Eigen::Index>(i));
  }
  p.degenerate = kept < 2;
  return p;
}

}  // namespace dfd
