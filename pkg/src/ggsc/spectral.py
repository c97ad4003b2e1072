"""Graph construction and graph Fourier transform for KD-tree leaves.

Each leaf of the partition becomes a fully connected weighted graph: the
edge weight between two primitives is a Gaussian kernel of their distance,
W[p, q] = exp(-||v_p - v_q||^2 / sigma^2), with a zero diagonal.  The
kernel bandwidth follows the bounding box of the cloud,
sigma = sqrt(min(X, Y, Z) / 20), so flat or tiny clouds fall back to a
small positive constant.  The combinatorial Laplacian L = D - W is
symmetric positive semidefinite; its eigenvectors, ordered by ascending
eigenvalue, form the transform basis.  Low eigenvalues correspond to
smooth signals over the leaf, which is what makes truncating the tail
coefficients a useful lossy step.

The eigendecomposition is a self-contained cyclic Jacobi sweep rather
than a LAPACK call: the decoder must rebuild bit-identical bases from the
same reconstructed centers on any platform, so the codec cannot depend on
vendor-specific eigensolver kernels.  Determinism is part of the format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import jit
from .gs_core import Box3

#: Convergence threshold on the off-diagonal Frobenius norm (the iteration
#: runs on a matrix prescaled into [0.5, 1), see `eig_sym`).
JACOBI_TOL = 1e-12
#: Hard sweep limit; exceeding it raises instead of returning garbage.
JACOBI_MAX_SWEEPS = 100
#: Eigenvalues in (-1e-10, 0) are clamped to zero; anything lower raises.
PSD_CLAMP = -1e-10

_SIGMA_FLOOR_SQ = 1e-12


@dataclass(frozen=True)
class GraphSpectrum:
    """Eigendecomposition of one leaf Laplacian.

    eigenvalues: (m,) ascending, non-negative.
    basis:       (m, m) orthonormal, column j pairs with eigenvalue j.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray

    def __len__(self) -> int:
        return self.eigenvalues.shape[0]


def sigma_from_box(box: Box3) -> float:
    """Kernel bandwidth from a bounding box: sqrt(min extent / 20).

    Degenerate boxes (a zero extent) use the floor sqrt(1e-12) = 1e-6 so
    coincident points still yield finite weights.
    """
    h = float(box.extents.min()) / 20.0
    return math.sqrt(max(h, _SIGMA_FLOOR_SQ))


def build_adjacency(centers: np.ndarray, sigma: float) -> np.ndarray:
    """Dense Gaussian affinity matrix with zero diagonal."""
    pts = np.asarray(centers, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"centers must be (N, 3), got {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    if not (sigma > 0.0) or not math.isfinite(sigma):
        raise ValueError("sigma must be finite and positive")
    diff = pts[:, None, :] - pts[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    w = np.exp(-sq / (sigma * sigma))
    np.fill_diagonal(w, 0.0)
    return w


def laplacian(adjacency: np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian L = D - W of a symmetric affinity matrix."""
    w = np.asarray(adjacency, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("adjacency must be square")
    lap = -w.copy()
    np.fill_diagonal(lap, 0.0)
    lap[np.diag_indices_from(lap)] = w.sum(axis=1)
    return lap


def _jacobi_cyclic(a, v, tol, max_sweeps):
    """Cyclic Jacobi diagonalization in place; returns sweeps used or -1.

    `a` is destroyed (diagonal becomes the eigenvalues), `v` must enter as
    the identity and leaves holding the eigenvectors in its columns.
    Rotation order is the fixed upper-triangle scan (0,1), (0,2), ...,
    which together with floating-point determinism makes the output a pure
    function of the input bits.
    """
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if math.sqrt(off) < tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                small = 100.0 * abs(apq)
                if sweep > 3 and abs(app) + small == abs(app) \
                        and abs(aqq) + small == abs(aqq):
                    # Rotation would be lost in rounding; zero the entry.
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = 0.5 * (aqq - app) / apq
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                h = t * apq
                a[p, p] = app - h
                a[q, q] = aqq + h
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp = a[r, p]
                        arq = a[r, q]
                        a[r, p] = arp - s * (arq + tau * arp)
                        a[p, r] = a[r, p]
                        a[r, q] = arq + s * (arp - tau * arq)
                        a[q, r] = a[r, q]
                for r in range(n):
                    vrp = v[r, p]
                    vrq = v[r, q]
                    v[r, p] = vrp - s * (vrq + tau * vrp)
                    v[r, q] = vrq + s * (vrp - tau * vrq)
    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            off += 2.0 * a[p, q] * a[p, q]
    if math.sqrt(off) < tol:
        return max_sweeps
    return -1


_jacobi_cyclic_jit = jit(_jacobi_cyclic)


def _normalize_columns(vals: np.ndarray, vecs: np.ndarray):
    """Ascending eigenvalue order with deterministic signs and tie order.

    Each column is flipped so its largest-magnitude entry (first such
    entry when magnitudes tie) is non-negative; runs of exactly equal
    eigenvalues are ordered lexicographically by eigenvector entries.
    """
    m = vals.shape[0]
    for j in range(m):
        col = vecs[:, j]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0.0:
            vecs[:, j] = -col
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    i = 0
    while i < m:
        j = i + 1
        while j < m and vals[j] == vals[i]:
            j += 1
        if j - i > 1:
            cols = sorted(range(i, j), key=lambda c: tuple(vecs[:, c]))
            vecs[:, i:j] = vecs[:, cols]
        i = j
    return vals, vecs


def eig_sym(matrix: np.ndarray,
            tol: float = JACOBI_TOL,
            max_sweeps: int = JACOBI_MAX_SWEEPS) -> GraphSpectrum:
    """Deterministic symmetric eigendecomposition (ascending eigenvalues).

    The matrix is prescaled by an exact power of two so its largest entry
    magnitude lands in [0.5, 1); the Jacobi iteration then converges to an
    absolute off-diagonal norm below `tol` regardless of the input's
    overall magnitude, and the eigenvalues are rescaled back exactly.
    Eigenvalues in (-1e-10, 0) are treated as rounding slop of a PSD
    matrix and clamped to zero; more negative values raise, as does
    failure to converge within `max_sweeps` sweeps.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    m = a.shape[0]
    if m < 1:
        raise ValueError("matrix must be at least 1x1")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix must be exactly symmetric")

    amax = float(np.abs(a).max())
    if amax == 0.0:
        vals = np.zeros(m)
        vecs = np.eye(m)
        return GraphSpectrum(eigenvalues=vals, basis=vecs)

    # frexp gives amax = mant * 2**exp with mant in [0.5, 1); dividing by
    # 2**exp is exact, so the scaled matrix carries the same mantissas.
    _, exp = math.frexp(amax)
    scale = math.ldexp(1.0, exp)
    work = np.ascontiguousarray(a / scale)
    vecs = np.eye(m)
    sweeps = _jacobi_cyclic_jit(work, vecs, tol, max_sweeps)
    if sweeps < 0:
        raise RuntimeError(
            f"Jacobi iteration did not converge within {max_sweeps} sweeps"
        )
    vals = np.diag(work).copy() * scale

    vals, vecs = _normalize_columns(vals, vecs)
    bad = vals < PSD_CLAMP
    if bad.any():
        raise ValueError(
            f"matrix is not positive semidefinite (eigenvalue {vals[bad][0]:g})"
        )
    vals[vals < 0.0] = 0.0
    return GraphSpectrum(eigenvalues=vals, basis=vecs)


def graph_spectrum(centers: np.ndarray, sigma: float) -> GraphSpectrum:
    """Spectrum of the Gaussian-affinity Laplacian of one leaf."""
    return eig_sym(laplacian(build_adjacency(centers, sigma)))


def gft(spectrum: GraphSpectrum, signal: np.ndarray) -> np.ndarray:
    """Forward transform: coefficients C = A^T f (A orthonormal columns).

    `signal` is (m,) or (m, k) for k channels transformed together.
    """
    f = np.asarray(signal, dtype=np.float64)
    if f.shape[0] != len(spectrum):
        raise ValueError(
            f"signal length {f.shape[0]} != graph size {len(spectrum)}"
        )
    return spectrum.basis.T @ f


def igft(spectrum: GraphSpectrum, coeffs: np.ndarray) -> np.ndarray:
    """Inverse transform: f = A C; accepts (m,) or (m, k) coefficients."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape[0] != len(spectrum):
        raise ValueError(
            f"coefficient length {c.shape[0]} != graph size {len(spectrum)}"
        )
    return spectrum.basis @ c


def clip_count(alpha: float, m: int) -> int:
    """Number of low-frequency coefficients kept out of m at ratio alpha.

    ceil(alpha * m), floored at 1 so the DC component always survives.
    The epsilon shields exact products like 0.1 * 200 from ceiling up on
    a one-ulp-high multiply.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    if m < 1:
        raise ValueError("m must be >= 1")
    k = math.ceil(alpha * m - 1e-9)
    return max(1, min(m, k))
