#pragma once

#include <complex>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gridlin {

using cdouble = std::complex<double>;

using VectorXd = Eigen::VectorXd;
using VectorXcd = Eigen::VectorXcd;
using MatrixXd = Eigen::MatrixXd;
using MatrixXcd = Eigen::MatrixXcd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrixd = Eigen::SparseMatrix<double>;
using SparseMatrixcd = Eigen::SparseMatrix<cdouble>;

}  // namespace gridlin
