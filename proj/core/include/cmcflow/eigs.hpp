#pragma once

#include "cmcflow/mesh.hpp"

#include <cstdint>

namespace cmcflow {

struct EigResult {
  VecX values;     // ascending
  MatX vectors;    // columns, M-orthonormal
  VecX residuals;  // ‖A x - λ M x‖₂ with ‖x‖_M = 1
};

/// Smallest `k` eigenpairs of the symmetric pencil (A, diag(m)) by
/// shift-invert Lanczos with full reorthogonalization (dense solve below
/// `dense_threshold`).  The shift is placed below the spectrum automatically
/// using the factorization inertia.
EigResult smallest_eigenpairs(const SpMat& A, const VecX& m, int k, int dense_threshold = 600,
                              std::uint64_t seed = 20240901ull);

}  // namespace cmcflow
