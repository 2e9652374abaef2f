"""
Q1 Frame Stiffness & Preconditioned CG
======================================
Trilinear finite elements for the weighted eps-Laplacian on a uniform grid.

Features:
1. Exact 2x2x2 Gauss quadrature of W <grad_eps phi_l, grad_eps phi_m>
2. Assembly into 27 flat-offset diagonals (x-fastest node numbering)
3. Frame-gradient norms and energy densities at the quadrature points
4. Dirichlet elimination and Jacobi-preconditioned conjugate gradients
"""

import logging
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from heis_imcf.models.grid_models import Box
from heis_imcf.services.observability import metrics

logger = logging.getLogger(__name__)

# Gauss points on [0, 1]
_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_LOCAL = [(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)]
_QUAD = [(qa, qb, qc) for qc in (0, 1) for qb in (0, 1) for qa in (0, 1)]
_PAIRS = [(l, m) for l in range(8) for m in range(l, 8)]


def _shape(k: int, xi: float) -> float:
    return xi if k else 1.0 - xi


def _dshape(k: int) -> float:
    return 1.0 if k else -1.0


class Q1FrameStiffness:
    """
    Stiffness of v -> -div_eps(W grad_eps v) for weights W given per
    cell and Gauss point.

    The frame metric in Euclidean partials is
    M = [[1, 0, -y/2], [0, 1, x/2], [-y/2, x/2, (x^2 + y^2)/4 + eps^2]],
    so every pair value is a linear form in (W, W y, W x, W S) with
    S = (x^2 + y^2)/4 + eps^2.
    """

    def __init__(self, box: Box, eps: float):
        self.box = box
        self.eps = float(eps)
        mx, my, mt = box.m
        hx, hy, ht = box.spacings

        # Shape-function partials at the Gauss points: D[q, l]
        self.Dx = np.zeros((8, 8))
        self.Dy = np.zeros((8, 8))
        self.N = np.zeros((8, 8))
        self.Dt = np.zeros((8, 8))
        for q, (qa, qb, qc) in enumerate(_QUAD):
            xi, eta, zeta = _GAUSS[qa], _GAUSS[qb], _GAUSS[qc]
            for l, (a, b, c) in enumerate(_LOCAL):
                self.N[q, l] = _shape(a, xi) * _shape(b, eta) * _shape(c, zeta)
                self.Dx[q, l] = _dshape(a) * _shape(b, eta) * _shape(c, zeta) / hx
                self.Dy[q, l] = _shape(a, xi) * _dshape(b) * _shape(c, zeta) / hy
                self.Dt[q, l] = _shape(a, xi) * _shape(b, eta) * _dshape(c) / ht

        self.quad_weight = box.cell_volume / 8.0
        self.offsets = np.array([a + mx * (b + my * c) for a, b, c in _LOCAL])

        ii, jj, kk = np.meshgrid(np.arange(mx - 1), np.arange(my - 1), np.arange(mt - 1), indexing='ij')
        self.origins = (ii + mx * (jj + my * kk)).ravel()

        xs, ys, _ = box.axes
        x0 = xs[ii.ravel()]
        y0 = ys[jj.ravel()]
        self.xq = np.stack([x0 + _GAUSS[qa] * hx for qa, _, _ in _QUAD], axis=1)
        self.yq = np.stack([y0 + _GAUSS[qb] * hy for _, qb, _ in _QUAD], axis=1)
        self.Sq = (self.xq ** 2 + self.yq ** 2) / 4.0 + self.eps ** 2

        self.coefficients = self._pair_coefficients()
        self.diagonal_offsets = sorted({int(self.offsets[m] - self.offsets[l])
                                        for l in range(8) for m in range(8)})

    @property
    def n_cells(self) -> int:
        return self.origins.size

    @property
    def n_nodes(self) -> int:
        return self.box.size

    def _pair_coefficients(self) -> np.ndarray:
        """C[(feature, q), pair] for the features (W, W y, W x, W S)"""
        Dx, Dy, Dt = self.Dx, self.Dy, self.Dt
        C = np.zeros((4, 8, len(_PAIRS)))
        for k, (l, m) in enumerate(_PAIRS):
            C[0, :, k] = Dx[:, l] * Dx[:, m] + Dy[:, l] * Dy[:, m]
            C[1, :, k] = -0.5 * (Dx[:, l] * Dt[:, m] + Dt[:, l] * Dx[:, m])
            C[2, :, k] = 0.5 * (Dy[:, l] * Dt[:, m] + Dt[:, l] * Dy[:, m])
            C[3, :, k] = Dt[:, l] * Dt[:, m]
        return C.reshape(32, len(_PAIRS)) * self.quad_weight

    def cell_values(self, v_flat: np.ndarray) -> np.ndarray:
        return v_flat[self.origins[:, None] + self.offsets[None, :]]

    def quadrature_values(self, v_flat: np.ndarray) -> np.ndarray:
        return self.cell_values(v_flat) @ self.N.T

    def frame_gradients(self, v_flat: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Frame components (a, b, c) at every (cell, Gauss point)"""
        V = self.cell_values(v_flat)
        ex, ey, et = V @ self.Dx.T, V @ self.Dy.T, V @ self.Dt.T
        return ex - 0.5 * self.yq * et, ey + 0.5 * self.xq * et, self.eps * et

    def gradient_squared(self, v_flat: np.ndarray) -> np.ndarray:
        a, b, c = self.frame_gradients(v_flat)
        return a * a + b * b + c * c

    def energy(self, v_flat: np.ndarray, p: float, sigma: float) -> float:
        """Gauss-quadrature value of the sum of (sigma + |grad v|^2)^(p/2) / p"""
        density = (sigma + self.gradient_squared(v_flat)) ** (p / 2.0) / p
        return float(np.sum(density) * self.quad_weight)

    def assemble(self, weights: np.ndarray) -> sparse.csr_matrix:
        """Symmetric stiffness for Gauss-point weights of shape (n_cells, 8)"""
        features = np.concatenate(
            [weights, weights * self.yq, weights * self.xq, weights * self.Sq], axis=1)

        n = self.n_nodes
        diagonals = {d: np.zeros(n) for d in self.diagonal_offsets}
        for k, (l, m) in enumerate(_PAIRS):
            values = features @ self.coefficients[:, k]
            d = int(self.offsets[m] - self.offsets[l])
            diagonals[d][self.origins + self.offsets[l]] += values
            if l != m:
                diagonals[-d][self.origins + self.offsets[m]] += values

        offsets, bands = [], []
        for d in self.diagonal_offsets:
            band = diagonals[d]
            bands.append(band[:n - d] if d >= 0 else band[-d:])
            offsets.append(d)
        return sparse.diags(bands, offsets, shape=(n, n), format='csr')


class PreconditionedCG:
    """Jacobi-preconditioned CG on the free block of a Dirichlet problem"""

    def __init__(self, rtol: float = 1e-10, maxiter: int = None):
        self.rtol = rtol
        self.maxiter = maxiter

    @staticmethod
    def split(A: sparse.csr_matrix, free: np.ndarray):
        """(A_ff, A_fd) for a boolean free-node mask over flat indices"""
        rows = A[free]
        return rows[:, free], rows[:, ~free]

    def solve(self, A_ff, b: np.ndarray, x0: np.ndarray = None, rtol: float = None) -> Tuple[np.ndarray, int, int]:
        """Returns (x, info, iterations); rtol overrides the instance tolerance"""
        diag = A_ff.diagonal()
        inv = 1.0 / np.where(diag > 0, diag, 1.0)
        M = LinearOperator(A_ff.shape, matvec=lambda r: inv * r, rmatvec=lambda r: inv * r, dtype=float)

        count = [0]

        def callback(_):
            count[0] += 1

        x, info = cg(A_ff, b, x0=x0, rtol=self.rtol if rtol is None else rtol, atol=0.0, maxiter=self.maxiter,
                     M=M, callback=callback)
        metrics.histogram('cg_iterations', count[0])
        if info != 0:
            logger.warning(f"CG stopped with info={info} after {count[0]} iterations")
        return x, info, count[0]
