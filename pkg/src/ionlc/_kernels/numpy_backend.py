"""Pure-numpy kernels: adaptive RK5(4) for harmonic-envelope generators
and red-black SOR for the electrode Laplace problem.

Reference implementation for the numba backend; both expose the same four
functions with identical call signatures and step-control arithmetic so
results agree to roundoff. Generators are passed in factored form,

    G(t) = sum_k ( sum_j coeffs[j] * exp(i * freqs[j] * t) ) * mats[k]

with ``offsets`` delimiting the coefficient run of each matrix. Callers
fold constants (including the -i of the Schrodinger equation) into
``coeffs`` so the kernels integrate dy/dt = G(t) y verbatim.
"""

import numpy as np

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

# below this fraction of the local time scale a step is considered collapsed
_H_FLOOR = 1e-14


def _envelope_matrix(mats, coeffs, freqs, offsets, t, out):
    out[:] = 0.0
    phases = coeffs * np.exp(1j * freqs * t)
    for k in range(mats.shape[0]):
        env = phases[offsets[k] : offsets[k + 1]].sum()
        if env != 0.0:
            out += env * mats[k]
    return out


def _controller_factor(err):
    if err == 0.0:
        return MAX_GROW
    return min(MAX_GROW, max(MIN_SHRINK, SAFETY * err ** (-ORDER_EXP)))


def _advance(rhs, y, t_grid, h_init, rtol, atol, max_steps, out):
    """Shared adaptive loop; ``rhs(t, y, out)`` fills dy/dt in place."""
    n_stage = 7
    t = t_grid[0]
    h = h_init
    out[0] = y
    stages = np.empty((n_stage,) + y.shape, dtype=np.complex128)
    ytmp = np.empty_like(y)
    rhs(t, y, stages[0])
    n_steps = 0
    for idx in range(1, t_grid.shape[0]):
        t_target = t_grid[idx]
        while t < t_target:
            if n_steps >= max_steps:
                return MAX_STEPS_EXCEEDED, n_steps, t
            if h < _H_FLOOR * max(1.0, abs(t)):
                return STEP_UNDERFLOW, n_steps, t
            clamped = t + h >= t_target
            h_step = t_target - t if clamped else h
            for s in range(1, n_stage):
                np.einsum("s,s...->...", h_step * A[s, :s], stages[:s], out=ytmp)
                ytmp += y
                rhs(t + C[s] * h_step, ytmp, stages[s])
            # FSAL: the 7th stage input is already the 5th-order solution
            y_new = ytmp
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_vec = np.einsum("s,s...->...", h_step * ERR, stages)
            # overflowing trial steps produce inf/nan here; the controller
            # treats a non-finite estimate as a rejection, so stay quiet
            with np.errstate(invalid="ignore", over="ignore"):
                err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
            n_steps += 1
            if err <= 1.0:
                t = t_target if clamped else t + h_step
                y[:] = y_new
                stages[0] = stages[6]
                if not clamped:
                    h = h_step * _controller_factor(err)
            else:
                h = h_step * min(1.0, _controller_factor(err))
        out[idx] = y
    return OK, n_steps, t


def rk45_linear(mats, coeffs, freqs, offsets, y0, t_grid, h_init, rtol, atol, max_steps):
    """Integrate dy/dt = G(t) y for one or many columns y.

    Returns (ys, status, n_steps, t_reached) with ys[i] the solution at
    t_grid[i]; on failure rows from the failure index on are zero.
    """
    n = mats.shape[1]
    g_buf = np.empty((n, n), dtype=np.complex128)

    def rhs(t, y, out):
        _envelope_matrix(mats, coeffs, freqs, offsets, t, g_buf)
        np.matmul(g_buf, y, out=out)

    y = np.array(y0, dtype=np.complex128)
    out = np.zeros((t_grid.shape[0],) + y.shape, dtype=np.complex128)
    status, n_steps, t_reached = _advance(
        rhs, y, t_grid, h_init, rtol, atol, max_steps, out
    )
    return out, status, n_steps, t_reached


def rk45_lindblad(
    hmats, coeffs, freqs, offsets, l_ops, ldl_ops, rho0, t_grid, h_init, rtol, atol, max_steps
):
    """Integrate the Lindblad master equation with harmonic-envelope H(t).

    l_ops carry their rate prefactors (sqrt(gamma) folded in) and ldl_ops
    are the matching precomputed L^dag L products.
    """
    n = hmats.shape[1]
    h_buf = np.empty((n, n), dtype=np.complex128)

    def rhs(t, rho, out):
        _envelope_matrix(hmats, coeffs, freqs, offsets, t, h_buf)
        np.matmul(h_buf, rho, out=out)
        tmp = rho @ h_buf
        out -= tmp
        out *= -1j
        for c in range(l_ops.shape[0]):
            lrho = l_ops[c] @ rho
            out += lrho @ l_ops[c].conj().T
            anti = ldl_ops[c] @ rho
            anti += rho @ ldl_ops[c]
            out -= 0.5 * anti

    rho = np.array(rho0, dtype=np.complex128)
    out = np.zeros((t_grid.shape[0], n, n), dtype=np.complex128)
    status, n_steps, t_reached = _advance(
        rhs, rho, t_grid, h_init, rtol, atol, max_steps, out
    )
    # keep the stored snapshots exactly Hermitian: integration error is
    # symmetric under conjugation only up to roundoff
    for i in range(out.shape[0]):
        out[i] = 0.5 * (out[i] + out[i].conj().T)
    return out, status, n_steps, t_reached


def _parity(shape):
    ii = np.arange(shape[0])[:, None]
    jj = np.arange(shape[1])[None, :]
    return ((ii + jj) % 2).astype(np.uint8)


def _update_masks(mask):
    """Per-color update selectors for the core block and the j=0 edge row.

    Neumann (mask 2) cells are honoured on the j=0 edge only, which is
    where the electrode plane puts them; elsewhere mask 2 is ignored.
    """
    parity = _parity(mask.shape)
    core = mask[1:-1, 1:-1] == 0
    row = mask[1:-1, 0] == 2
    pc = parity[1:-1, 1:-1]
    pr = parity[1:-1, 0]
    return (
        (core & (pc == 0), core & (pc == 1)),
        (row & (pr == 0), row & (pr == 1)),
    )


def _sweep_once(phi, omega, core_sel, row_sel):
    max_delta = 0.0
    core = phi[1:-1, 1:-1]
    edge = phi[1:-1, 0]
    for color in (0, 1):
        target = 0.25 * (
            phi[:-2, 1:-1] + phi[2:, 1:-1] + phi[1:-1, :-2] + phi[1:-1, 2:]
        )
        sel = core_sel[color]
        delta = omega * (target[sel] - core[sel])
        if delta.size:
            max_delta = max(max_delta, float(np.max(np.abs(delta))))
            core[sel] += delta
        # mirror ghost phi[i, -1] = phi[i, 1]: the j=1 neighbour counts twice
        rsel = row_sel[color]
        if rsel.any():
            target_row = 0.25 * (phi[:-2, 0] + phi[2:, 0] + 2.0 * phi[1:-1, 1])
            rdelta = omega * (target_row[rsel] - edge[rsel])
            if rdelta.size:
                max_delta = max(max_delta, float(np.max(np.abs(rdelta))))
                edge[rsel] += rdelta
    return max_delta


def sor_sweep(phi, mask, omega):
    """One red-black SOR pass over phi in place; returns max |change|.

    mask codes: 0 interior update, 1 Dirichlet (frozen), 2 Neumann cell on
    the j=0 boundary (mirror ghost across the boundary plane).
    """
    core_sel, row_sel = _update_masks(mask)
    return _sweep_once(phi, omega, core_sel, row_sel)


def sor_solve(phi, mask, omega, tol, max_sweeps, check_every):
    """Relax phi in place until the Laplace residual drops below tol.

    Returns (residual, sweeps). Convergence holds iff residual <= tol;
    the caller decides how to report non-convergence.
    """
    core_sel, row_sel = _update_masks(mask)
    sweeps = 0
    residual = laplace_residual(phi, mask)
    while residual > tol and sweeps < max_sweeps:
        for _ in range(check_every):
            _sweep_once(phi, omega, core_sel, row_sel)
            sweeps += 1
            if sweeps >= max_sweeps:
                break
        residual = laplace_residual(phi, mask)
    return residual, sweeps


def laplace_residual(phi, mask):
    """Max |five-point Laplace defect| over all updateable cells."""
    core_sel, row_sel = _update_masks(mask)
    core = phi[1:-1, 1:-1]
    target = 0.25 * (
        phi[:-2, 1:-1] + phi[2:, 1:-1] + phi[1:-1, :-2] + phi[1:-1, 2:]
    )
    sel = core_sel[0] | core_sel[1]
    defect = 0.0
    if sel.any():
        defect = float(np.max(np.abs(target[sel] - core[sel])))
    rsel = row_sel[0] | row_sel[1]
    if rsel.any():
        target_row = 0.25 * (phi[:-2, 0] + phi[2:, 0] + 2.0 * phi[1:-1, 1])
        defect = max(defect, float(np.max(np.abs(target_row[rsel] - phi[1:-1, 0][rsel]))))
    return defect
