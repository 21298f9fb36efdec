#pragma once

#include "grid.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace hadamard {

struct SpectrumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// f(H) for Hermitian H through the eigendecomposition.
template <class F>
[[nodiscard]] Matrix hermitian_function(const Matrix& H, F&& f) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.adjoint()));
    if (es.info() != Eigen::Success) throw SpectrumError("Hermitian eigensolver failed");
    RealVector v = es.eigenvalues().unaryExpr(f);
    return es.eigenvectors() * v.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

[[nodiscard]] inline RealVector hermitian_eigenvalues(const Matrix& H) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SpectrumError("Hermitian eigensolver failed");
    return es.eigenvalues();
}

[[nodiscard]] inline double eigmin(const Matrix& H) { return hermitian_eigenvalues(H).minCoeff(); }

[[nodiscard]] inline Matrix sqrt_psd(const Matrix& H) {
    return hermitian_function(H, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

[[nodiscard]] inline Matrix inv_sqrt_pd(const Matrix& H, const std::string& what = "matrix") {
    const double lo = eigmin(H);
    if (!(lo > 0.0)) throw SpectrumError(what + " is not positive definite, eigmin = " + std::to_string(lo));
    return hermitian_function(H, [](double x) { return 1.0 / std::sqrt(x); });
}

/// Largest singular value.
[[nodiscard]] inline double operator_norm(const Matrix& A) {
    return std::sqrt(std::max(0.0, hermitian_eigenvalues(A.adjoint() * A).maxCoeff()));
}

/// Relative deviation max|A − B| / max(1, max|B|).
[[nodiscard]] inline double relative_deviation(const Matrix& A, const Matrix& B) {
    return (A - B).cwiseAbs().maxCoeff() / std::max(1.0, B.cwiseAbs().maxCoeff());
}

/// 2×2 block operator on Cauchy data (f₀, f₁), stored as one 2n×2n matrix.
struct BlockOperator {
    SpatialGrid grid;
    Matrix entries;

    BlockOperator(SpatialGrid g, Matrix m) : grid(g), entries(std::move(m)) {
        if (entries.rows() != 2 * g.size() || entries.cols() != 2 * g.size())
            throw std::invalid_argument("block operator must be 2n×2n");
    }

    [[nodiscard]] static BlockOperator from_blocks(const SpatialGrid& g, const Matrix& a, const Matrix& b,
                                                   const Matrix& c, const Matrix& d) {
        const int n = g.size();
        Matrix m(2 * n, 2 * n);
        m << a, b, c, d;
        return {g, m};
    }

    /// q = [[0,1],[1,0]]
    [[nodiscard]] static BlockOperator charge(const SpatialGrid& g) {
        const int n = g.size();
        const Matrix I = Matrix::Identity(n, n), Z = Matrix::Zero(n, n);
        return from_blocks(g, Z, I, I, Z);
    }

    [[nodiscard]] static BlockOperator identity(const SpatialGrid& g) {
        return {g, Matrix::Identity(2 * g.size(), 2 * g.size())};
    }

    [[nodiscard]] Matrix block(int i, int j) const {
        const int n = grid.size();
        return entries.block(i * n, j * n, n, n);
    }

    [[nodiscard]] BlockOperator adjoint() const { return {grid, entries.adjoint()}; }

    friend BlockOperator operator*(const BlockOperator& a, const BlockOperator& b) {
        require_same(a.grid, b.grid);
        return {a.grid, a.entries * b.entries};
    }
    friend BlockOperator operator+(const BlockOperator& a, const BlockOperator& b) {
        return {a.grid, a.entries + b.entries};
    }
    friend BlockOperator operator-(const BlockOperator& a, const BlockOperator& b) {
        return {a.grid, a.entries - b.entries};
    }
};

}  // namespace hadamard
