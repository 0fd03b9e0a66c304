// freeq - linalg.hpp
// Small fixed-size vector/transform types and a dense symmetric-friendly matrix.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace freeq {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? *this / n : Vec3{};
    }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// 4x4 rigid transform, row-major; by convention camera-to-world for poses.
struct Mat4 {
    std::array<double, 16> m{};

    static Mat4 identity() {
        Mat4 r;
        r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
        return r;
    }

    double at(int r, int c) const { return m[r * 4 + c]; }
    double& at(int r, int c) { return m[r * 4 + c]; }

    Mat4 operator*(const Mat4& o) const {
        Mat4 r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += at(i, k) * o.at(k, j);
                r.at(i, j) = s;
            }
        return r;
    }

    Vec3 transform_point(const Vec3& p) const {
        return {at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z + at(0, 3),
                at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z + at(1, 3),
                at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z + at(2, 3)};
    }

    Vec3 rotate(const Vec3& p) const {
        return {at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z,
                at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z,
                at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z};
    }

    Vec3 translation() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

    // Inverse assuming the upper-left 3x3 block is a rotation.
    Mat4 inverse_rigid() const {
        Mat4 r = identity();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
        Vec3 t = translation();
        Vec3 it = r.rotate(t);
        r.at(0, 3) = -it.x;
        r.at(1, 3) = -it.y;
        r.at(2, 3) = -it.z;
        return r;
    }

    // ||R^T R - I||_inf and det check; used by pose validation.
    double rotation_defect() const {
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += at(k, i) * at(k, j);
                worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
            }
        double det = at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
                     at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
                     at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
        worst = std::max(worst, std::fabs(det - 1.0));
        return worst;
    }
};

// Dense row-major matrix; square in all spectral uses.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }

    double max_asymmetry() const {
        double worst = 0.0;
        for (int i = 0; i < rows; ++i)
            for (int j = i + 1; j < cols; ++j)
                worst = std::max(worst, std::fabs(at(i, j) - at(j, i)));
        return worst;
    }
};

}  // namespace freeq
