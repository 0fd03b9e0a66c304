// freeq - spectral.cpp

#include "freeq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "freeq/io.hpp"
#include "freeq/superpoints.hpp"

namespace freeq {

Matrix normalized_laplacian(const SimilarityMatrix& A) {
    A.validate();
    const int n = A.size();
    std::vector<double> degree(n, 0.0), dinv(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += A.entries.at(i, j);
        degree[i] = s;
        dinv[i] = s > 0.0 ? 1.0 / std::sqrt(s) : 0.0;
    }
    Matrix L(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double dij = (i == j ? degree[i] : 0.0) - A.entries.at(i, j);
            L.at(i, j) = dij * dinv[i] * dinv[j];
        }
        if (degree[i] <= 0.0) L.at(i, i) = 1.0;  // isolated-node convention
    }
    return L;
}

void eig_symmetric(const Matrix& M, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
    if (M.rows != M.cols) throw DimensionMismatch("eig_symmetric needs a square matrix");
    if (M.max_asymmetry() > 1e-9)
        throw DimensionMismatch("eig_symmetric input is not symmetric within 1e-9");
    const int n = M.rows;
    Matrix a = M;
    Matrix v = Matrix::identity(n);

    double fro = 0.0;
    for (double x : M.a) fro += x * x;
    fro = std::sqrt(fro);
    const double stop = std::max(1e-300, 1e-14 * fro);

    const int max_sweeps = 64;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (std::sqrt(2.0 * off) <= stop) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int r = 0; r < n; ++r) {
                    const double arp = a.at(r, p), arq = a.at(r, q);
                    a.at(r, p) = c * arp - s * arq;
                    a.at(r, q) = s * arp + c * arq;
                }
                for (int r = 0; r < n; ++r) {
                    const double apr = a.at(p, r), aqr = a.at(q, r);
                    a.at(p, r) = c * apr - s * aqr;
                    a.at(q, r) = s * apr + c * aqr;
                }
                for (int r = 0; r < n; ++r) {
                    const double vrp = v.at(r, p), vrq = v.at(r, q);
                    v.at(r, p) = c * vrp - s * vrq;
                    v.at(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }
    if (sweep == max_sweeps) throw ConvergenceFailure("Jacobi did not converge in 64 sweeps");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return a.at(x, x) < a.at(y, y); });
    eigenvalues.resize(n);
    eigenvectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        eigenvalues[k] = a.at(order[k], order[k]);
        for (int r = 0; r < n; ++r) eigenvectors.at(r, k) = v.at(r, order[k]);
    }
}

int eigengap_select(const std::vector<double>& eigenvalues, int j_max) {
    const int n = static_cast<int>(eigenvalues.size());
    if (n < 3) throw TooFewEigenvalues("eigengap_select needs at least 3 eigenvalues");
    const int hi = std::min(j_max, n - 1);
    int best_j = 1;
    double best_gap = eigenvalues[1] - eigenvalues[0];
    for (int j = 2; j <= hi; ++j) {
        const double gap = eigenvalues[j] - eigenvalues[j - 1];
        if (gap > best_gap) {
            best_gap = gap;
            best_j = j;
        }
    }
    return best_j;
}

std::vector<int> kmeans_rows(const Matrix& rows, int k, int max_iters) {
    const int n = rows.rows, d = rows.cols;
    auto dist2 = [&](int i, const std::vector<double>& c) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            const double diff = rows.at(i, j) - c[j];
            s += diff * diff;
        }
        return s;
    };

    // Farthest-point seeding from row 0; ties break toward the smaller index.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    {
        std::vector<double> first(d);
        for (int j = 0; j < d; ++j) first[j] = rows.at(0, j);
        centroids.push_back(std::move(first));
    }
    std::vector<double> min_d2(n, 0.0);
    for (int i = 0; i < n; ++i) min_d2[i] = dist2(i, centroids[0]);
    while (static_cast<int>(centroids.size()) < k) {
        int far = 0;
        for (int i = 1; i < n; ++i)
            if (min_d2[i] > min_d2[far]) far = i;
        std::vector<double> c(d);
        for (int j = 0; j < d; ++j) c[j] = rows.at(far, j);
        centroids.push_back(std::move(c));
        for (int i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], dist2(i, centroids.back()));
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = dist2(i, centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double dd = dist2(i, centroids[c]);
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) sums[assign[i]][j] += rows.at(i, j);
            counts[assign[i]]++;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (int j = 0; j < d; ++j) centroids[c][j] = sums[c][j] / counts[c];
        // Empty clusters keep their previous centroid.
    }
    return assign;
}

std::string spectral_result_to_json(const SpectralResult& result) {
    io::JsonWriter w;
    w.begin_object();
    w.key("eigenvalues");
    w.begin_array();
    for (double v : result.eigenvalues) w.value_double(v);
    w.end_array();
    w.key("chosen_clusters");
    w.value_int(result.chosen_clusters);
    w.key("assignment");
    w.begin_object();
    for (const auto& [sp, cluster] : result.assignment) {
        w.key(std::to_string(sp));
        w.value_int(cluster);
    }
    w.end_object();
    w.end_object();
    return w.str();
}

SpectralResult spectral_cluster(const SimilarityMatrix& A) {
    const int n = A.size();
    if (n < 3) throw TooFewEigenvalues("spectral_cluster needs at least 3 superpoints");

    SpectralResult result;
    const Matrix L = normalized_laplacian(A);
    eig_symmetric(L, result.eigenvalues, result.eigenvectors);
    result.chosen_clusters = eigengap_select(result.eigenvalues, default_j_max(n));

    const int h = result.chosen_clusters;
    Matrix embedding(n, h);
    for (int i = 0; i < n; ++i) {
        double norm = 0.0;
        for (int j = 0; j < h; ++j) {
            const double x = result.eigenvectors.at(i, j);
            embedding.at(i, j) = x;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (int j = 0; j < h; ++j) embedding.at(i, j) /= norm;
        // Zero rows stay at the origin.
    }

    const std::vector<int> assign = kmeans_rows(embedding, h);
    for (int i = 0; i < n; ++i) result.assignment[A.superpoint_ids[i]] = assign[i];
    return result;
}

}  // namespace freeq
