"""Numba-compiled kernels, loop-for-loop equivalents of numpy_backend.

Same four entry points, same signatures, same step-control arithmetic;
only the inner evaluation strategy differs (explicit element loops and
BLAS matmuls under @njit instead of vectorized numpy expressions). Kept
in lockstep with numpy_backend.py; the equivalence tests pin the two
together, and IONLC_KERNELS selects between them at run time.
"""

import numpy as np
from numba import njit

from .tableau import (
    A,
    B5,
    C,
    ERR,
    MAX_GROW,
    MAX_STEPS_EXCEEDED,
    MIN_SHRINK,
    OK,
    ORDER_EXP,
    SAFETY,
    STEP_UNDERFLOW,
)

_H_FLOOR = 1e-14


@njit(cache=True, nogil=True)
def _fill_envelope(mats, coeffs, freqs, offsets, t, out):
    n = mats.shape[1]
    out[:, :] = 0.0
    for k in range(mats.shape[0]):
        env = 0.0 + 0.0j
        for j in range(offsets[k], offsets[k + 1]):
            env += coeffs[j] * np.exp(1j * (freqs[j] * t))
        if env != 0.0:
            for r in range(n):
                for c in range(n):
                    out[r, c] += env * mats[k, r, c]


@njit(cache=True, nogil=True)
def _controller_factor(err):
    if err == 0.0:
        return MAX_GROW
    return min(MAX_GROW, max(MIN_SHRINK, SAFETY * err ** (-ORDER_EXP)))


@njit(cache=True, nogil=True)
def rk45_linear(mats, coeffs, freqs, offsets, y0, t_grid, h_init, rtol, atol, max_steps):
    n = mats.shape[1]
    m = y0.shape[1]
    n_out = t_grid.shape[0]
    out = np.zeros((n_out, n, m), dtype=np.complex128)
    y = y0.astype(np.complex128).copy()
    stages = np.empty((7, n, m), dtype=np.complex128)
    ytmp = np.empty((n, m), dtype=np.complex128)
    g_buf = np.empty((n, n), dtype=np.complex128)

    t = t_grid[0]
    h = h_init
    out[0] = y
    _fill_envelope(mats, coeffs, freqs, offsets, t, g_buf)
    stages[0] = np.dot(g_buf, y)
    n_steps = 0
    for idx in range(1, n_out):
        t_target = t_grid[idx]
        while t < t_target:
            if n_steps >= max_steps:
                return out, MAX_STEPS_EXCEEDED, n_steps, t
            if h < _H_FLOOR * max(1.0, abs(t)):
                return out, STEP_UNDERFLOW, n_steps, t
            clamped = t + h >= t_target
            h_step = t_target - t if clamped else h
            for s in range(1, 7):
                for r in range(n):
                    for c in range(m):
                        acc = 0.0 + 0.0j
                        for j in range(s):
                            a_sj = A[s, j]
                            if a_sj != 0.0:
                                acc += a_sj * stages[j, r, c]
                        ytmp[r, c] = y[r, c] + h_step * acc
                _fill_envelope(mats, coeffs, freqs, offsets, t + C[s] * h_step, g_buf)
                stages[s] = np.dot(g_buf, ytmp)
            # FSAL: after s = 6 ytmp holds the fifth-order solution
            err_acc = 0.0
            for r in range(n):
                for c in range(m):
                    e = 0.0 + 0.0j
                    for s in range(7):
                        e_s = ERR[s]
                        if e_s != 0.0:
                            e += e_s * stages[s, r, c]
                    sc = atol + rtol * max(abs(y[r, c]), abs(ytmp[r, c]))
                    q = abs(h_step * e) / sc
                    err_acc += q * q
            err = np.sqrt(err_acc / (n * m))
            n_steps += 1
            if err <= 1.0:
                t = t_target if clamped else t + h_step
                y[:, :] = ytmp
                stages[0] = stages[6]
                if not clamped:
                    h = h_step * _controller_factor(err)
            else:
                h = h_step * min(1.0, _controller_factor(err))
        out[idx] = y
    return out, OK, n_steps, t


@njit(cache=True, nogil=True)
def rk45_lindblad(
    hmats, coeffs, freqs, offsets, l_ops, ldl_ops, rho0, t_grid, h_init, rtol, atol, max_steps
):
    n = hmats.shape[1]
    n_ch = l_ops.shape[0]
    n_out = t_grid.shape[0]
    out = np.zeros((n_out, n, n), dtype=np.complex128)
    rho = rho0.astype(np.complex128).copy()
    stages = np.empty((7, n, n), dtype=np.complex128)
    rtmp = np.empty((n, n), dtype=np.complex128)
    h_buf = np.empty((n, n), dtype=np.complex128)
    l_dag = np.empty_like(l_ops)
    for ch in range(n_ch):
        for r in range(n):
            for c in range(n):
                l_dag[ch, r, c] = np.conj(l_ops[ch, c, r])

    t = t_grid[0]
    h = h_init
    out[0] = rho
    _lindblad_rhs(hmats, coeffs, freqs, offsets, l_ops, l_dag, ldl_ops, t, rho, h_buf, stages[0])
    n_steps = 0
    for idx in range(1, n_out):
        t_target = t_grid[idx]
        while t < t_target:
            if n_steps >= max_steps:
                return out, MAX_STEPS_EXCEEDED, n_steps, t
            if h < _H_FLOOR * max(1.0, abs(t)):
                return out, STEP_UNDERFLOW, n_steps, t
            clamped = t + h >= t_target
            h_step = t_target - t if clamped else h
            for s in range(1, 7):
                for r in range(n):
                    for c in range(n):
                        acc = 0.0 + 0.0j
                        for j in range(s):
                            a_sj = A[s, j]
                            if a_sj != 0.0:
                                acc += a_sj * stages[j, r, c]
                        rtmp[r, c] = rho[r, c] + h_step * acc
                _lindblad_rhs(
                    hmats, coeffs, freqs, offsets, l_ops, l_dag, ldl_ops,
                    t + C[s] * h_step, rtmp, h_buf, stages[s],
                )
            err_acc = 0.0
            for r in range(n):
                for c in range(n):
                    e = 0.0 + 0.0j
                    for s in range(7):
                        e_s = ERR[s]
                        if e_s != 0.0:
                            e += e_s * stages[s, r, c]
                    sc = atol + rtol * max(abs(rho[r, c]), abs(rtmp[r, c]))
                    q = abs(h_step * e) / sc
                    err_acc += q * q
            err = np.sqrt(err_acc / (n * n))
            n_steps += 1
            if err <= 1.0:
                t = t_target if clamped else t + h_step
                rho[:, :] = rtmp
                stages[0] = stages[6]
                if not clamped:
                    h = h_step * _controller_factor(err)
            else:
                h = h_step * min(1.0, _controller_factor(err))
        out[idx] = rho
    for i in range(n_out):
        for r in range(n):
            for c in range(r, n):
                avg = 0.5 * (out[i, r, c] + np.conj(out[i, c, r]))
                out[i, r, c] = avg
                out[i, c, r] = np.conj(avg)
    return out, OK, n_steps, t


@njit(cache=True, nogil=True)
def _lindblad_rhs(hmats, coeffs, freqs, offsets, l_ops, l_dag, ldl_ops, t, rho, h_buf, out):
    n = rho.shape[0]
    _fill_envelope(hmats, coeffs, freqs, offsets, t, h_buf)
    hr = np.dot(h_buf, rho)
    rh = np.dot(rho, h_buf)
    for r in range(n):
        for c in range(n):
            out[r, c] = -1j * (hr[r, c] - rh[r, c])
    for ch in range(l_ops.shape[0]):
        lr = np.dot(l_ops[ch], rho)
        lrl = np.dot(lr, l_dag[ch])
        a1 = np.dot(ldl_ops[ch], rho)
        a2 = np.dot(rho, ldl_ops[ch])
        for r in range(n):
            for c in range(n):
                out[r, c] += lrl[r, c] - 0.5 * (a1[r, c] + a2[r, c])


@njit(cache=True, nogil=True)
def sor_sweep(phi, mask, omega):
    nx, nz = phi.shape
    max_delta = 0.0
    for color in range(2):
        for i in range(1, nx - 1):
            j0 = 1 if (i + 1) % 2 == color else 2
            for j in range(j0, nz - 1, 2):
                if mask[i, j] == 0:
                    target = 0.25 * (
                        ((phi[i - 1, j] + phi[i + 1, j]) + phi[i, j - 1]) + phi[i, j + 1]
                    )
                    d = omega * (target - phi[i, j])
                    phi[i, j] += d
                    ad = abs(d)
                    if ad > max_delta:
                        max_delta = ad
            if i % 2 == color and mask[i, 0] == 2:
                # mirror ghost phi[i, -1] = phi[i, 1]
                target = 0.25 * ((phi[i - 1, 0] + phi[i + 1, 0]) + 2.0 * phi[i, 1])
                d = omega * (target - phi[i, 0])
                phi[i, 0] += d
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
    return max_delta


@njit(cache=True, nogil=True)
def sor_solve(phi, mask, omega, tol, max_sweeps, check_every):
    sweeps = 0
    residual = laplace_residual(phi, mask)
    while residual > tol and sweeps < max_sweeps:
        for _ in range(check_every):
            sor_sweep(phi, mask, omega)
            sweeps += 1
            if sweeps >= max_sweeps:
                break
        residual = laplace_residual(phi, mask)
    return residual, sweeps


@njit(cache=True, nogil=True)
def laplace_residual(phi, mask):
    nx, nz = phi.shape
    defect = 0.0
    for i in range(1, nx - 1):
        for j in range(1, nz - 1):
            if mask[i, j] == 0:
                target = 0.25 * (
                    ((phi[i - 1, j] + phi[i + 1, j]) + phi[i, j - 1]) + phi[i, j + 1]
                )
                d = abs(target - phi[i, j])
                if d > defect:
                    defect = d
        if mask[i, 0] == 2:
            target = 0.25 * ((phi[i - 1, 0] + phi[i + 1, 0]) + 2.0 * phi[i, 1])
            d = abs(target - phi[i, 0])
            if d > defect:
                defect = d
    return defect
