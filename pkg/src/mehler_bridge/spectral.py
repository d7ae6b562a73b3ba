"""Quadratic reaction rates and their modal (eigen-) coordinate data.

A reaction rate is the convex quadratic z -> 1/2 z'Qz + r'z + s with
Q symmetric positive semidefinite.  Everything downstream works in the
eigenbasis of Q/2, where the rate decouples into per-coordinate terms
lambda_k x_k^2 + b_k x_k + s/n.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonSymmetricError,
    NotPSDError,
    SingularAffineModeError,
)

__all__ = [
    "TOL_SYM",
    "TOL_EIG",
    "QuadraticRate",
    "SpectralData",
    "decompose",
    "to_modal",
    "from_modal",
    "affine_constants",
]

# Symmetry tolerance on Q (max |Q_ij - Q_ji|).
TOL_SYM = 1e-12

# Eigenvalues of Q/2 below this are treated as exactly zero; the closed
# forms are continuous in lambda -> 0+ but ill-conditioned below ~1e-8.
TOL_EIG = 1e-10


def _as_matrix(Q) -> np.ndarray:
    Q = np.array(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionMismatchError(f"Q must be square, got shape {Q.shape}")
    return Q


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class QuadraticRate:
    """Convex quadratic reaction rate 1/2 z'Qz + r'z + s.

    Parameters
    ----------
    Q : (n, n) array_like
        Symmetric PSD curvature matrix (units 1/[x^2 t], diffusion
        coefficient normalized to 1).
    r : (n,) array_like
        Linear coefficient.
    s : float
        Constant offset.
    """

    Q: np.ndarray
    r: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        Q = _as_matrix(self.Q)
        r = np.array(self.r, dtype=float).reshape(-1)
        if r.shape[0] != Q.shape[0]:
            raise DimensionMismatchError(
                f"r has length {r.shape[0]}, expected {Q.shape[0]}"
            )
        if Q.shape[0] < 1:
            raise DimensionMismatchError("dimension must be >= 1")
        asym = float(np.max(np.abs(Q - Q.T))) if Q.size else 0.0
        if asym > TOL_SYM:
            raise NonSymmetricError(
                f"max |Q_ij - Q_ji| = {asym:.3e} exceeds {TOL_SYM:.0e}"
            )
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "r", _freeze(r))
        object.__setattr__(self, "s", float(self.s))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def value(self, z) -> float:
        """Evaluate the rate at a point in original coordinates."""
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != self.n:
            raise DimensionMismatchError("point dimension mismatch")
        return float(0.5 * z @ self.Q @ z + self.r @ z + self.s)


@dataclass(frozen=True)
class SpectralData:
    """Eigen-decomposition Q/2 = V' diag(lambdas) V plus projected affine data.

    Rows of ``V`` are the (orthonormal) eigenvectors of Q/2, so modal
    coordinates are x = V z.  ``b`` holds the linear coefficient projected
    onto each eigenvector, ``c`` the per-mode completing-the-square
    constants c_k = b_k^2/(4 lambda_k) - s/n (with the b term dropped on
    zero modes).
    """

    V: np.ndarray
    lambdas: np.ndarray
    b: np.ndarray
    s: float
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        V = _as_matrix(self.V)
        n = V.shape[0]
        lambdas = np.array(self.lambdas, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        if lambdas.shape[0] != n or b.shape[0] != n:
            raise DimensionMismatchError("lambdas/b length must match V")
        ortho = float(np.max(np.abs(V @ V.T - np.eye(n))))
        if ortho > 1e-10:
            raise NonSymmetricError(f"V is not orthogonal: ||VV'-I||_max = {ortho:.3e}")
        if np.any(lambdas < 0):
            raise NotPSDError("negative eigenvalue after clamping")
        c = self.c
        if c is None:
            c = affine_constants(lambdas, b, self.s)
        c = np.array(c, dtype=float).reshape(-1)
        if c.shape[0] != n:
            raise DimensionMismatchError("c length must match V")
        object.__setattr__(self, "V", _freeze(V))
        object.__setattr__(self, "lambdas", _freeze(lambdas))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "c", _freeze(c))

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def is_affine(self) -> bool:
        """True when the rate has a linear or constant part."""
        return bool(np.any(self.b != 0.0) or self.s != 0.0)

    def modal_rate(self, x) -> float:
        """Reaction rate at a point given in modal coordinates."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise DimensionMismatchError("point dimension mismatch")
        return float(self.lambdas @ (x * x) + self.b @ x + self.s)


def affine_constants(lambdas, b, s) -> np.ndarray:
    """Per-mode constants c_k = b_k^2/(4 lambda_k) - s/n.

    On zero modes (lambda_k <= TOL_EIG) the quotient is dropped, which is
    only consistent when |b_k| <= TOL_EIG there; callers enforce that.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    b = np.asarray(b, dtype=float)
    n = lambdas.shape[0]
    c = np.full(n, -float(s) / n)
    pos = lambdas > TOL_EIG
    c[pos] += b[pos] ** 2 / (4.0 * lambdas[pos])
    return c


def _jacobi_eigh(A: np.ndarray, tol_factor: float = 1e-14, max_sweeps: int = 60):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Returns eigenvalues (unsorted) and the orthogonal matrix R with
    eigenvectors as columns, A = R diag(w) R'.  Sweeps stop when the
    off-diagonal Frobenius norm drops below tol_factor * ||A||_F.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    R = np.eye(n)
    norm_a = float(np.linalg.norm(a))
    if n == 1 or norm_a == 0.0:
        return np.diag(a).copy(), R
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a**2) - np.sum(np.diag(a) ** 2))
        if off < tol_factor * norm_a:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                # A <- J' A J with the rotation J in the (p, q) plane.
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cth * ap - sth * aq
                a[:, q] = sth * ap + cth * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = cth * ap - sth * aq
                a[q, :] = sth * ap + cth * aq
                a[p, q] = a[q, p] = 0.0
                rp, rq = R[:, p].copy(), R[:, q].copy()
                R[:, p] = cth * rp - sth * rq
                R[:, q] = sth * rp + cth * rq
    return np.diag(a).copy(), R


def decompose(rate: QuadraticRate) -> SpectralData:
    """Diagonalize Q/2 and project the affine data onto the eigenbasis.

    Eigenvalues are sorted ascending and clamped to zero below TOL_EIG;
    each eigenvector's first nonzero component is made positive so the
    result is deterministic.  Raises NotPSDError for eigenvalues below
    -TOL_EIG and SingularAffineModeError when a zero mode carries a
    linear coefficient larger than TOL_EIG.
    """
    half_q = 0.25 * (rate.Q + rate.Q.T)
    w, R = _jacobi_eigh(half_q)
    order = np.argsort(w, kind="stable")
    w = w[order]
    V = R[:, order].T  # rows are eigenvectors
    if np.any(w < -TOL_EIG):
        raise NotPSDError(f"eigenvalue {w.min():.3e} of Q/2 below -{TOL_EIG:.0e}")
    w = np.where(np.abs(w) < TOL_EIG, 0.0, w)
    for k in range(V.shape[0]):
        row = V[k]
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            V[k] = -row
    b = V @ rate.r
    bad = (w <= TOL_EIG) & (np.abs(b) > TOL_EIG)
    if np.any(bad):
        k = int(np.nonzero(bad)[0][0])
        raise SingularAffineModeError(
            f"mode {k}: lambda_{k} = {w[k]:.3e} but |b_{k}| = {abs(b[k]):.3e}; "
            "the closed-form kernel is undefined for a linear potential "
            "on a flat mode"
        )
    return SpectralData(V=V, lambdas=w, b=b, s=rate.s)


def to_modal(dec: SpectralData, z) -> np.ndarray:
    """Map a point from original to modal coordinates, x = V z."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != dec.n:
        raise DimensionMismatchError(f"expected length {dec.n}, got {z.shape[0]}")
    return dec.V @ z


def from_modal(dec: SpectralData, x) -> np.ndarray:
    """Inverse of :func:`to_modal`, z = V' x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dec.n:
        raise DimensionMismatchError(f"expected length {dec.n}, got {x.shape[0]}")
    return dec.V.T @ x
