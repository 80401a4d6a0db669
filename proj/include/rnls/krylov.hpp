#pragma once

#include <functional>
#include <vector>

namespace rnls {

using LinearOp = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct KrylovResult {
  std::vector<double> x;
  int iterations = 0;
  /// Preconditioned residual estimate relative to the right-hand side.
  double relative_residual = 0.0;
  std::vector<double> history;
  bool converged = false;
};

/// Preconditioned MINRES for symmetric (possibly indefinite) A with a
/// symmetric positive definite preconditioner M^{-1}.
KrylovResult minres(const LinearOp& apply_a, const LinearOp& apply_m_inv, const std::vector<double>& b,
                    double tol, int max_iter);

}  // namespace rnls
