"""Sparse factorization of the 2K x 2K saddle-point system.

The smoothing subproblem couples the coefficient vector f with an
auxiliary field g through the indefinite block matrix

    [[ UL,        lam * R1 ],
     [ lam * R1, -lam * R0 ]]

where UL is the data term (psi' psi for dense data, the per-function
weighted Gram matrix for partially observed data), R0 the mass matrix
and R1 the stiffness matrix. The block system is factored once and
solved for many right-hand sides; its sparse form is preferred over the
dense normal-equation rearrangement, whose inverse mass factor destroys
sparsity.
"""

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as splinalg

from .errors import DimensionMismatch, InputError, SingularSystem
from .fem import FemOperators


class SaddleSystem:
    """A factored saddle-point system for one smoothing parameter.

    Use :func:`build`; the constructor performs the factorization.
    Instances are immutable; `solve` is reentrant and safe to call from
    several threads on one instance.
    """

    def __init__(self, ops: FemOperators, upper_left, lam: float):
        lam = float(lam)
        if not lam > 0:
            raise InputError(f"smoothing parameter must be positive, got {lam:g}")
        K = ops.vertex_count
        upper_left = sparse.csr_matrix(upper_left)
        if upper_left.shape != (K, K):
            raise DimensionMismatch(
                f"upper-left block must be {K}x{K}, got {upper_left.shape}"
            )
        self.lam = lam
        self.k = K
        # The block matrix is singular exactly when the data block
        # vanishes on the penalty null space; on a connected mesh that
        # null space is the constants, so test the constant vector
        # directly. The factorization itself would otherwise slip
        # through on a tiny pivot and return garbage.
        ones = np.ones(K)
        kernel_energy = float(ones @ (upper_left @ ones))
        trace = float(upper_left.diagonal().sum())
        if trace <= 0.0 or kernel_energy <= 1e-12 * trace:
            raise SingularSystem(
                "data block vanishes on constant fields; the penalty "
                "cannot close the kernel"
            )
        penalty = lam * ops.stiffness
        self.matrix = sparse.bmat(
            [[upper_left, penalty], [penalty, -lam * ops.mass]], format="csc"
        )
        try:
            self._lu = splinalg.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularSystem(f"saddle-point factorization failed: {exc}") from exc

    def solve(self, rhs_top):
        """Solve for one top-block right-hand side; bottom block is zero.

        Returns the pair (f, g) of coefficient vectors.
        """
        rhs_top = np.asarray(rhs_top, dtype=np.float64)
        if rhs_top.shape != (self.k,):
            raise DimensionMismatch(
                f"right-hand side must have length {self.k}, got {rhs_top.shape}"
            )
        rhs = np.zeros(2 * self.k)
        rhs[: self.k] = rhs_top
        sol = self._lu.solve(rhs)
        return sol[: self.k].copy(), sol[self.k :].copy()

    def solve_many(self, rhs_top):
        """Solve for a (K, m) block of right-hand sides at once.

        Returns (F, G), each of shape (K, m).
        """
        rhs_top = np.asarray(rhs_top, dtype=np.float64)
        if rhs_top.ndim != 2 or rhs_top.shape[0] != self.k:
            raise DimensionMismatch(
                f"right-hand sides must have shape ({self.k}, m), got {rhs_top.shape}"
            )
        rhs = np.zeros((2 * self.k, rhs_top.shape[1]))
        rhs[: self.k] = rhs_top
        sol = self._lu.solve(rhs)
        return sol[: self.k].copy(), sol[self.k :].copy()


def build(ops: FemOperators, upper_left, lam: float) -> SaddleSystem:
    """Factor the saddle-point block matrix for reuse across solves.

    Parameters
    ----------
    ops : FemOperators
    upper_left : sparse matrix, shape (K, K)
        Symmetric positive semidefinite data block.
    lam : float
        Positive smoothing parameter.

    Raises
    ------
    SingularSystem
        Factorization breakdown; typically a rank-deficient data block
        paired with a penalty that does not close the kernel.
    """
    return SaddleSystem(ops, upper_left, lam)
