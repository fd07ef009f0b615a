"""Dense complex linear algebra kernels.

Everything here works on plain ``numpy`` arrays.  The Hermitian eigensolver
is a cyclic Jacobi method that accepts stacks of matrices, which is what the
entropy code needs when it diagonalises thousands of snapshot states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian, NotPsd


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    reconstruction: float = 1e-9
    trace_preservation: float = 1e-9
    density_trace: float = 1e-10
    eigen_clamp: float = 1e-10
    margin_bits: float = 1e-7
    survival_floor: float = 1e-14


TOL = Tolerances()


@dataclass(frozen=True)
class HermitianSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues[..., None, :]) @ np.swapaxes(u, -1, -2).conj()


def as_matrix(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def _off_norm(a: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(a[:, mask]) ** 2, axis=1))


def _jacobi_sweep(a: np.ndarray, v, scale: np.ndarray, pairs) -> None:
    """One cyclic sweep over all (p, q) pairs, in place."""
    eps = np.finfo(float).eps
    for p, q in pairs:
        apq = a[:, p, q]
        r = np.abs(apq)
        active = r > eps * 0.01 * scale
        if not np.any(active):
            continue
        app = a[:, p, p].real
        aqq = a[:, q, q].real
        rs = np.where(active, r, 1.0)
        tau = (aqq - app) / (2.0 * rs)
        t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
        c = 1.0 / np.sqrt(1.0 + t * t)
        s = t * c
        c = np.where(active, c, 1.0)
        s = np.where(active, s, 0.0)
        ph = np.where(active, apq / rs, 1.0)  # e^{i phi}
        phc = ph.conj()
        c_ = c[:, None]
        s_ = s[:, None]
        # columns: A <- A G with G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
        colp = a[:, :, p].copy()
        colq = a[:, :, q]
        a[:, :, p] = c_ * colp - (s * phc)[:, None] * colq
        a[:, :, q] = s_ * colp + (c * phc)[:, None] * colq
        # rows: A <- G^dagger A
        rowp = a[:, p, :].copy()
        rowq = a[:, q, :]
        a[:, p, :] = c_ * rowp - (s * ph)[:, None] * rowq
        a[:, q, :] = s_ * rowp + (c * ph)[:, None] * rowq
        a[:, p, q] = np.where(active, 0.0, a[:, p, q])
        a[:, q, p] = np.where(active, 0.0, a[:, q, p])
        if v is not None:
            vp = v[:, :, p].copy()
            vq = v[:, :, q]
            v[:, :, p] = c_ * vp - (s * phc)[:, None] * vq
            v[:, :, q] = s_ * vp + (c * phc)[:, None] * vq


def _jacobi_sweeps(a: np.ndarray, want_vectors: bool, max_sweeps: int):
    """Cyclic Jacobi on a stack ``a`` of shape (B, n, n); modifies ``a``.

    Matrices that have converged are dropped from later sweeps.
    """
    nb, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=complex), (nb, n, n)).copy() if want_vectors else None
    scale = np.maximum(np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2))), np.finfo(float).tiny)
    eps = np.finfo(float).eps
    offmask = ~np.eye(n, dtype=bool)
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    todo = np.arange(nb)
    for _ in range(max_sweeps):
        off = _off_norm(a[todo], offmask)
        todo = todo[off > eps * scale[todo]]
        if todo.size == 0:
            break
        sub = a[todo]
        vsub = v[todo] if want_vectors else None
        _jacobi_sweep(sub, vsub, scale[todo], pairs)
        a[todo] = sub
        if want_vectors:
            v[todo] = vsub
    else:
        if not np.all(_off_norm(a[todo], offmask) <= 1e3 * eps * scale[todo]):
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diagonal(a, axis1=1, axis2=2).real.copy(), v


def hermitian_eig(m, tol: float = TOL.hermitian, max_sweeps: int = 60) -> HermitianSpectrum:
    """Eigendecomposition of a Hermitian matrix (or stack of them).

    Eigenvalues come back ascending along the last axis, eigenvectors as the
    columns of a unitary matrix.  Raises ``NotHermitian`` when
    ``max|M - M^dagger|`` exceeds ``tol``.
    """
    a = as_matrix(m)
    if np.max(np.abs(a - dagger(a)), initial=0.0) > tol:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    batch = a.shape[:-2]
    n = a.shape[-1]
    work = (0.5 * (a + dagger(a))).reshape(-1, n, n).copy()
    w, v = _jacobi_sweeps(work, True, max_sweeps)
    order = np.argsort(w, axis=1)
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return HermitianSpectrum(w.reshape(*batch, n), v.reshape(*batch, n, n))


def eigvalsh(m, tol: float = TOL.hermitian, max_sweeps: int = 60) -> np.ndarray:
    """Ascending eigenvalues only; skips the eigenvector accumulation."""
    a = as_matrix(m)
    if np.max(np.abs(a - dagger(a)), initial=0.0) > tol:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    batch = a.shape[:-2]
    n = a.shape[-1]
    work = (0.5 * (a + dagger(a))).reshape(-1, n, n).copy()
    w, _ = _jacobi_sweeps(work, False, max_sweeps)
    return np.sort(w, axis=1).reshape(*batch, n)


# Pade(13) scaling-and-squaring (Higham 2005)
_PADE13 = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
])
_THETA13 = 5.371920351148152


def expm(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expm needs a square matrix, got {a.shape}")
    a = a.astype(complex if np.iscomplexobj(a) else float)
    n = a.shape[0]
    if not np.any(a @ a):
        # the series stops after the linear term
        return np.eye(n, dtype=a.dtype) + a
    norm1 = np.max(np.sum(np.abs(a), axis=0), initial=0.0)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
        a = a / 2.0**s
    b = _PADE13
    ident = np.eye(n, dtype=a.dtype)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def psd_sqrt(m, tol: float = TOL.reconstruction) -> np.ndarray:
    """Hermitian PSD square root; eigenvalues in [-tol, 0) are clamped to 0."""
    spec = hermitian_eig(m)
    lam = spec.eigenvalues
    if np.min(lam) < -tol:
        raise NotPsd(f"smallest eigenvalue {np.min(lam):.3e} below -{tol:g}")
    root = np.sqrt(np.clip(lam, 0.0, None))
    u = spec.eigenvectors
    return (u * root[..., None, :]) @ dagger(u)


def psd_factor(m, tol: float = TOL.reconstruction) -> np.ndarray:
    """Some ``B`` with ``B^dagger B = M``; we return the Hermitian root."""
    return psd_sqrt(m, tol)


def polar_unitary(k) -> np.ndarray:
    """Unitary factor ``U`` of ``K = U |K|`` for invertible ``K``."""
    k = as_matrix(k)
    spec = hermitian_eig(dagger(k) @ k, tol=1e-8)
    if np.min(spec.eigenvalues) <= 0:
        raise NotPsd("polar_unitary needs an invertible matrix")
    u = spec.eigenvectors
    inv_abs = (u * (1.0 / np.sqrt(spec.eigenvalues))[None, :]) @ dagger(u)
    return k @ inv_abs


def spectral_norm_hermitian(m) -> float:
    w = eigvalsh(m)
    return float(np.max(np.abs(w), initial=0.0))
