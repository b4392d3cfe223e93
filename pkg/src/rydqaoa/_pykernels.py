"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def apply_layers(psi: np.ndarray, angles: np.ndarray, diag: np.ndarray, n: int) -> None:
    dim, m = psi.shape
    if dim != 1 << n:
        raise ValueError("psi has the wrong number of rows")
    if diag.shape != (4, dim):
        raise ValueError("diag must have shape (4, 2**n)")
    if angles.ndim != 2 or angles.shape[1] != 5:
        raise ValueError("angles must have shape (p, 5)")
    # columns (gamma_odd, gamma_even, beta_odd, beta_even) line up with diag rows
    phases = np.exp(-1j * (angles[:, [4, 3, 2, 1]] @ diag))
    work = psi
    for k in range(angles.shape[0]):
        work *= phases[k][:, None]
        c, s = np.cos(angles[k, 0]), np.sin(angles[k, 0])
        for q in range(n):
            view = work.reshape(1 << q, 2, dim >> (q + 1), m)
            a = view[:, 0].copy()
            b = view[:, 1]
            view[:, 0] = c * a - 1j * s * b
            view[:, 1] = -1j * s * a + c * b


def apply_layers_overlap(psi0, target, angles, diag, n) -> float:
    work = np.array(psi0, dtype=complex).reshape(-1, 1)
    apply_layers(work, angles, diag, n)
    return float(abs(np.vdot(target, work[:, 0])) ** 2)


def apply_layers_trace(target, angles, diag, n) -> float:
    dim = target.shape[0]
    work = np.eye(dim, dtype=complex)
    apply_layers(work, angles, diag, n)
    return float(abs(np.vdot(target, work)) / dim)
