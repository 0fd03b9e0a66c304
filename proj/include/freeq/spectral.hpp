// freeq - spectral.hpp
// Normalized Laplacian, Jacobi eigendecomposition, eigengap model selection,
// and spectral cluster assignment for the superpoint merge.

#pragma once

#include <map>
#include <vector>

#include "freeq/errors.hpp"
#include "freeq/linalg.hpp"

namespace freeq {

struct SimilarityMatrix;  // superpoints.hpp

struct SpectralResult {
    std::vector<double> eigenvalues;  // ascending
    Matrix eigenvectors;              // orthonormal columns matching eigenvalues
    int chosen_clusters = 0;          // H
    std::map<int, int> assignment;    // superpoint id -> cluster id
};

// L = D^{-1/2} (D - A) D^{-1/2}; zero-degree rows take unit diagonal so
// isolated superpoints become singleton clusters.
Matrix normalized_laplacian(const SimilarityMatrix& A);

// Cyclic Jacobi for symmetric matrices. Eigenvalues ascending, eigenvectors
// as orthonormal columns. Throws ConvergenceFailure after bounded sweeps and
// DimensionMismatch when the input is not symmetric within 1e-9.
void eig_symmetric(const Matrix& M, std::vector<double>& eigenvalues, Matrix& eigenvectors);

// H = argmax over j in [1, j_max] of eigenvalues[j] - eigenvalues[j-1]
// (1-indexed gaps), ties toward the smaller j. Throws TooFewEigenvalues
// below 3 eigenvalues.
int eigengap_select(const std::vector<double>& eigenvalues, int j_max);

inline constexpr int kEigengapCap = 32;
inline int default_j_max(int count) { return std::min(count - 2, kEigengapCap); }

// Full pipeline: Laplacian -> eigendecomposition -> eigengap -> row-normalized
// spectral embedding -> k-means (farthest-point seeding from index 0,
// 100 iterations max).
SpectralResult spectral_cluster(const SimilarityMatrix& A);

// Deterministic k-means used by spectral_cluster; exposed for tests.
std::vector<int> kmeans_rows(const Matrix& rows, int k, int max_iters = 100);

// Debug serialization: {eigenvalues, chosen_clusters, assignment}.
std::string spectral_result_to_json(const SpectralResult& result);

}  // namespace freeq
