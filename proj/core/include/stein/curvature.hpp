#pragma once

#include "stein/fields.hpp"

namespace stein {

// How many derivatives of curvature to populate.
//   Ricci:  R, ric, z, hess_psi, ric_Z
//   First:  + dstar_R, nabla_ric, nabla_hess_psi, nabla_R, T
//   Second: + nabla_T
enum class CurvatureLevel { Ricci = 0, First = 1, Second = 2 };

// Curvature data at a point, all components in the orthonormal frame `frame`.
// R(a,b,c,d) = <R(e_a,e_b)e_c, e_d>, Ric(a,b) = sum_i R(a,i,i,b).
struct CurvatureBundle {
    int n = 0;
    CurvatureLevel level = CurvatureLevel::Ricci;
    Mat frame;
    Tensor R;                // rank 4
    Mat ric;
    Vec z;                   // grad psi
    Mat hess_psi;
    Mat ric_Z;               // Ric - 2 Hess psi
    Tensor dstar_R;          // (a,b,c): <d*R(e_a,e_b), e_c>, d*R(v1,v2) = -tr (nabla_. R)(., v1)v2
    Tensor nabla_ric;        // (x,a,b): <(nabla_x Ric#) e_a, e_b>
    Tensor nabla_hess_psi;   // (x,a,b)
    Tensor nabla_R;          // (x,a,b,c,d)
    Tensor T;                // (a,b,c): <(nabla Ric#_Z + d*R - 2R(Z))(e_a,e_b), e_c>
    Tensor nabla_T;          // (x,a,b,c)

    // Exact-zero flags for the transport sources, refreshed by curvature_at.
    bool R_zero = true, T_zero = true, nabla_R_zero = true, nabla_T_zero = true;
    void update_flags();

    // R(X,Y)V as a vector in frame coordinates.
    Vec curv(const Vec& X, const Vec& Y, const Vec& V) const;
    // T(X,Y) as a vector.
    Vec apply_T(const Vec& X, const Vec& Y) const;
};

CurvatureBundle curvature_at(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot,
                             CurvatureLevel level = CurvatureLevel::First, const FdSteps& steps = {});
CurvatureBundle curvature_at(const ManifoldPoint& p, const PotentialSpec& pot,
                             CurvatureLevel level = CurvatureLevel::First);

// True when every component except z is the same in every orthonormal frame along any path, so a
// bundle computed once can be reused: constant curvature with psi = 0, or flat with parallel Hess psi.
bool frame_invariant(const Manifold& M, const PotentialSpec& pot);

// Ric_psi = Ric - 2 Hess psi in the frame.
Mat bakry_emery_at(const Manifold& M, const Vec& p, const Mat& frame, const PotentialSpec& pot);
Mat bakry_emery_at(const ManifoldPoint& p, const PotentialSpec& pot);

}  // namespace stein
