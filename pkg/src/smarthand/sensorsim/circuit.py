"""Ground-truth circuit solver and cross-talk inversion.

The sensor matrix is a bipartite resistor network: every row electrode is
connected to every column electrode through the crossing resistance. The
scan electronics pin some electrodes to fixed potentials (ground or V_ref);
the rest float. nodal_oracle solves Kirchhoff's current law for the
floating potentials exactly and reports per-column source currents, which
is the reference against which the closed-form isolation readout and the
cross-talk inversion are checked.

Without electrical isolation the scan drives one row, grounds one column
through the current reader, and leaves the other 62 electrodes floating.
The measured conductance is then the two-terminal effective conductance of
the whole network between those two electrodes, polluted by every parasitic
path through the floating electrodes. crosstalk_solve recovers the true
crossing resistances from such measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonConvergenceError, SingularSystemError, ValidationError
from .physics import ReadoutConfig


def _resistance_of(grid) -> np.ndarray:
    R = np.asarray(getattr(grid, "resistance", grid), dtype=np.float64)
    if R.ndim != 2:
        raise ValidationError("resistance must be a 2-D matrix")
    if R.shape[0] > 32 or R.shape[1] > 32:
        raise ValidationError("grid larger than 32x32")
    if np.any(R <= 0):
        raise ValidationError("resistances must be positive")
    return R


@dataclass(frozen=True)
class DriveSpec:
    """Which electrodes the scan pins, and to what.

    Electrodes not listed float. Potentials: grounded -> 0 V,
    pulled -> V_ref.
    """

    grounded_rows: frozenset = frozenset()
    grounded_cols: frozenset = frozenset()
    pulled_rows: frozenset = frozenset()
    pulled_cols: frozenset = frozenset()

    @classmethod
    def isolation(cls, row: int, n_rows: int, n_cols: int) -> "DriveSpec":
        """One row grounded, every other electrode held at V_ref."""
        return cls(
            grounded_rows=frozenset([row]),
            pulled_rows=frozenset(set(range(n_rows)) - {row}),
            pulled_cols=frozenset(range(n_cols)),
        )

    @classmethod
    def floating_scan(cls, row: int, col: int) -> "DriveSpec":
        """One row driven to V_ref, one column read at ground, rest floating."""
        return cls(pulled_rows=frozenset([row]), grounded_cols=frozenset([col]))


def _laplacian(g: np.ndarray) -> np.ndarray:
    nr, nc = g.shape
    n = nr + nc
    L = np.zeros((n, n))
    L[:nr, nr:] = -g
    L[nr:, :nr] = -g.T
    L[np.arange(nr), np.arange(nr)] = g.sum(axis=1)
    L[np.arange(nr, n), np.arange(nr, n)] = g.sum(axis=0)
    return L


def nodal_oracle(grid, drive: DriveSpec, cfg: ReadoutConfig = ReadoutConfig()) -> np.ndarray:
    """Exact column source currents for a pinned/floating drive pattern.

    Solves KCL for the floating node potentials (dense LU with partial
    pivoting) and returns, per column electrode, the current flowing from
    that electrode into the network (positive when the column sources
    current). Floating columns carry zero external current by definition.
    """
    R = _resistance_of(grid)
    nr, nc = R.shape
    g = 1.0 / R
    n = nr + nc

    potential = np.zeros(n)
    pinned = np.zeros(n, dtype=bool)
    for r in drive.grounded_rows:
        pinned[r] = True
    for c in drive.grounded_cols:
        pinned[nr + c] = True
    for r in drive.pulled_rows:
        if pinned[r]:
            raise ValidationError(f"row {r} both grounded and pulled up")
        pinned[r] = True
        potential[r] = cfg.V_ref
    for c in drive.pulled_cols:
        if pinned[nr + c]:
            raise ValidationError(f"column {c} both grounded and pulled up")
        pinned[nr + c] = True
        potential[nr + c] = cfg.V_ref

    L = _laplacian(g)
    free = ~pinned
    if free.any():
        L_ff = L[np.ix_(free, free)]
        rhs = -L[np.ix_(free, pinned)] @ potential[pinned]
        try:
            potential[free] = np.linalg.solve(L_ff, rhs)
        except np.linalg.LinAlgError as e:
            raise SingularSystemError(f"floating-node system is singular: {e}")

    v_rows = potential[:nr]
    v_cols = potential[nr:]
    currents = (g * (v_cols[None, :] - v_rows[:, None])).sum(axis=0)
    currents[~pinned[nr:]] = 0.0
    return currents


def isolation_scan_via_nodal(grid, cfg: ReadoutConfig = ReadoutConfig()) -> np.ndarray:
    """Full-matrix voltage map computed row by row through nodal_oracle.

    The transimpedance stage converts the column current I into
    V_out = V_ref + I * R_FB, clamped at the rails. This is the
    circuit-level reference for scan_frame's closed form.
    """
    R = _resistance_of(grid)
    nr, nc = R.shape
    out = np.zeros((nr, nc))
    for row in range(nr):
        currents = nodal_oracle(grid, DriveSpec.isolation(row, nr, nc), cfg)
        out[row] = np.clip(cfg.V_ref + currents * cfg.R_FB, 0.0, cfg.adc_ref)
    return out


def floating_scan_conductances(grid, cfg: ReadoutConfig = ReadoutConfig()) -> np.ndarray:
    """Effective conductance matrix measured by the non-isolated scan.

    Entry (i, j) is the two-terminal conductance between row i and column
    j with every other electrode floating, i.e. measured current / V_ref.
    Uses nodal_oracle per crossing, so it is an independent forward model
    for crosstalk_solve to invert.
    """
    R = _resistance_of(grid)
    nr, nc = R.shape
    G = np.zeros((nr, nc))
    for i in range(nr):
        for j in range(nc):
            currents = nodal_oracle(grid, DriveSpec.floating_scan(i, j), cfg)
            G[i, j] = -currents[j] / cfg.V_ref  # current sunk by the reader
    return G


def effective_resistances(g: np.ndarray) -> np.ndarray:
    """Two-terminal effective resistance for every (row, col) electrode pair.

    R_eff(u, v) = (e_u - e_v)^T L+ (e_u - e_v) with L+ the pseudoinverse of
    the network Laplacian; closed form used inside the Newton iteration.
    """
    nr, nc = g.shape
    Lp = np.linalg.pinv(_laplacian(g), hermitian=True)
    du = np.diag(Lp)[:nr]
    dv = np.diag(Lp)[nr:]
    return du[:, None] + dv[None, :] - 2.0 * Lp[:nr, nr:]


def crosstalk_solve(
    measured: np.ndarray,
    topology: tuple[int, int] | None = None,
    max_iterations: int = 10_000,
    tolerance: float = 1e-9,
) -> np.ndarray:
    """Recover true crossing resistances from floating-scan conductances.

    Newton iteration on the branch conductances g: the model maps g to the
    effective port resistances R_eff(g); the Jacobian has the closed form
    dR_eff(u,v)/dg_ab = -[(e_u - e_v)^T L+ (e_a - e_b)]^2. Starts from
    g = measured (exact when cross-talk is absent) and converges when the
    largest relative update drops below `tolerance`.

    Raises NonConvergenceError with iteration count and residual when the
    cap is hit. Reliable on diagonally dominant grids (direct conductance
    not swamped by the parasitic paths).
    """
    G_meas = np.asarray(measured, dtype=np.float64)
    if topology is not None and tuple(topology) != G_meas.shape:
        raise ValidationError(f"topology {topology} != measurement shape {G_meas.shape}")
    if G_meas.ndim != 2 or np.any(G_meas <= 0):
        raise ValidationError("measured conductances must be a positive 2-D matrix")
    nr, nc = G_meas.shape
    n = nr + nc
    R_target = (1.0 / G_meas).ravel()

    # measurement m = (row u_m, col v_m), branch b enumerated identically
    U = np.repeat(np.arange(nr), nc)
    V = nr + np.tile(np.arange(nc), nr)

    g = G_meas.copy().ravel()
    residual = np.inf
    for iteration in range(1, max_iterations + 1):
        Lp = np.linalg.pinv(_laplacian(g.reshape(nr, nc)), hermitian=True)
        R_model = Lp[U, U] + Lp[V, V] - 2.0 * Lp[U, V]
        F = R_model - R_target
        residual = float(np.max(np.abs(F) / R_target))

        S = Lp[np.ix_(U, U)] - Lp[np.ix_(U, V)] - Lp[np.ix_(V, U)] + Lp[np.ix_(V, V)]
        J = -(S * S)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)

        # keep conductances positive; halve the step until feasible
        scale = 1.0
        for _ in range(60):
            if np.all(g + scale * step > 0):
                break
            scale *= 0.5
        else:
            raise NonConvergenceError(
                "step cannot keep conductances positive", iteration, residual
            )
        g = g + scale * step
        rel_update = float(np.max(np.abs(scale * step) / g))
        if rel_update < tolerance:
            return 1.0 / g.reshape(nr, nc)

    raise NonConvergenceError(
        f"no convergence in {max_iterations} iterations", max_iterations, residual
    )
