"""Sparse recovery of range/velocity/angle triples from one coarse cell.

The snapshot of coarse cell g is modeled as y = A b + w where b is sparse on
the (velocity, fine-range, angle) grid of size N x M x (P*Q_r).  Columns use
centered frequency grids by default, f(idx) = idx/size - 1/2, so grid index
(N/2, M/2, Q/2) is the zero-offset (all-ones) steering column and recovered
fine ranges/velocities/angles are signed offsets around the cell center.

Two solvers are provided: greedy orthogonal matching pursuit with
least-squares refitting, and an ADMM basis-pursuit solver handling both the
equality (eps = 0) and noisy inequality constraint through an l2-ball
projection.  The ADMM linear solve uses the small R x R Gram factor
(I + A A^H) via the matrix-inversion identity, so the per-iteration cost is
two dictionary products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .config import SystemConfig
from .im_codec import PulseSelection, selection_arrays
from .radar_sim import cell_center

__all__ = [
    "NonConvergenceError",
    "Dictionary",
    "SparseScene",
    "RecoveredTarget",
    "build_dictionary",
    "omp_recover",
    "bp_recover",
    "default_bp_eps",
    "grid_to_physical",
    "physical_to_grid",
    "recovered_targets",
]

# refuse to materialize dictionaries beyond this many entries (rows * cols)
MAX_DICTIONARY_ELEMENTS = 1 << 26


class NonConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations before meeting its tolerance."""


@dataclass(frozen=True)
class Dictionary:
    """Steering dictionary for one coarse cell, shape (N*K*Q_r, N*M*P*Q_r)."""

    A: np.ndarray
    cfg: SystemConfig
    selections: tuple[PulseSelection, ...]
    exact_xi: bool
    centered: bool

    @property
    def grid_shape(self) -> tuple[int, int, int]:
        """(velocity, fine-range, angle) grid sizes."""
        return (self.cfg.N, self.cfg.M, self.cfg.Q)

    def flat_index(self, n_tilde: int, m: int, q: int) -> int:
        N, M, Q = self.grid_shape
        if not (0 <= n_tilde < N and 0 <= m < M and 0 <= q < Q):
            raise ValueError(f"grid triple {(n_tilde, m, q)} out of range {self.grid_shape}")
        return (n_tilde * M + m) * Q + q

    def unflatten(self, flat: int) -> tuple[int, int, int]:
        N, M, Q = self.grid_shape
        if not 0 <= flat < N * M * Q:
            raise ValueError(f"flat index {flat} out of range({N * M * Q})")
        n_tilde, rem = divmod(flat, M * Q)
        m, q = divmod(rem, Q)
        return (n_tilde, m, q)


@dataclass(frozen=True)
class SparseScene:
    """Solver output: support (flat column indices) and complex gains."""

    support: tuple[int, ...]
    coeffs: np.ndarray
    residual_norm: float
    n_columns: int
    iterations: int

    def dense(self) -> np.ndarray:
        b = np.zeros(self.n_columns, dtype=np.complex128)
        b[list(self.support)] = self.coeffs
        return b


@dataclass(frozen=True)
class RecoveredTarget:
    r: float
    v: float
    theta: float
    beta: complex
    flat_index: int
    cell: int


def build_dictionary(
    selections: list[PulseSelection],
    cfg: SystemConfig,
    exact_xi: bool = True,
    centered: bool = True,
) -> Dictionary:
    """Dense steering dictionary for the selections of one CPI.

    Rows follow the snapshot layout n*K*Q_r + k*Q_r + q_r; columns follow
    n_tilde*M*Q + m*Q + q over the (velocity, fine-range, angle) grid.
    """
    if len(selections) != cfg.N:
        raise ValueError(f"need {cfg.N} selections, got {len(selections)}")
    n_rows = cfg.N * cfg.K * cfg.Q_r
    n_cols = cfg.N * cfg.M * cfg.Q
    if n_rows * n_cols > MAX_DICTIONARY_ELEMENTS:
        raise ValueError(
            f"dictionary of {n_rows} x {n_cols} exceeds the "
            f"{MAX_DICTIONARY_ELEMENTS}-element cap"
        )
    m_idx, p_idx, _ = selection_arrays(selections)          # (N, K)
    if exact_xi:
        xi = (cfg.f_c + m_idx * cfg.delta_f) / cfg.f_c
    else:
        xi = np.ones_like(m_idx, dtype=float)
    qr = np.arange(cfg.Q_r)
    # per-row factors, flattened C-order over (n, k, q_r)
    m_row = np.repeat(m_idx, cfg.Q_r).astype(float)
    xi_row = np.repeat(xi, cfg.Q_r)
    n_row = np.repeat(np.arange(cfg.N), cfg.K * cfg.Q_r).astype(float)
    virt_row = (cfg.Q_r * p_idx[:, :, None] + qr[None, None, :]).reshape(-1).astype(float)

    half = 0.5 if centered else 0.0
    f_v = np.arange(cfg.N) / cfg.N - half
    f_r = np.arange(cfg.M) / cfg.M - half
    f_t = np.arange(cfg.Q) / cfg.Q - half

    phase = (
        m_row[:, None, None, None] * f_r[None, None, :, None]
        + (xi_row * n_row)[:, None, None, None] * f_v[None, :, None, None]
        + (xi_row * virt_row)[:, None, None, None] * f_t[None, None, None, :]
    )
    A = np.exp(-2j * np.pi * phase).reshape(n_rows, n_cols)
    return Dictionary(
        A=A, cfg=cfg, selections=tuple(selections), exact_xi=exact_xi, centered=centered
    )


# ----------------------------------------------------------------------
# solvers
# ----------------------------------------------------------------------

def omp_recover(
    y: np.ndarray,
    dic: Dictionary,
    n_targets: int | None = None,
    residual_tol: float | None = None,
    max_iter: int | None = None,
) -> SparseScene:
    """Orthogonal matching pursuit with least-squares refitting.

    Stops after ``n_targets`` atoms when the model order is known, otherwise
    when the residual norm drops to ``residual_tol``.
    """
    if n_targets is None and residual_tol is None:
        raise ValueError("one of n_targets or residual_tol is required")
    A = dic.A
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"snapshot length {y.shape[0]} != dictionary rows {A.shape[0]}")
    cap = n_targets if n_targets is not None else min(A.shape[0], 64)
    if max_iter is not None:
        cap = min(cap, max_iter)

    support: list[int] = []
    coeffs = np.zeros(0, dtype=np.complex128)
    resid = y.copy()
    for it in range(cap):
        if n_targets is None and np.linalg.norm(resid) <= residual_tol:
            break
        corr = np.abs(A.conj().T @ resid)
        if support:
            corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = A[:, support]
        coeffs, *_ = np.linalg.lstsq(sub, y, rcond=None)
        resid = y - sub @ coeffs
    rnorm = float(np.linalg.norm(resid))
    if n_targets is None and rnorm > residual_tol:
        raise NonConvergenceError(
            f"OMP residual {rnorm:.3e} above tolerance {residual_tol:.3e} "
            f"after {cap} atoms"
        )
    return SparseScene(
        support=tuple(support),
        coeffs=np.asarray(coeffs, dtype=np.complex128),
        residual_norm=rnorm,
        n_columns=A.shape[1],
        iterations=len(support),
    )


def default_bp_eps(cfg: SystemConfig, sigma_r: float) -> float:
    """Noise-ball radius: mean noise norm plus about two standard deviations."""
    n = cfg.N * cfg.K * cfg.Q_r
    return float(sigma_r * (math.sqrt(n) + 2.0))


def bp_recover(
    y: np.ndarray,
    dic: Dictionary,
    eps: float = 0.0,
    rho: float = 1.0,
    max_iter: int = 10000,
    tol: float = 1e-6,
    support_threshold: float = 1e-3,
    on_limit: str = "raise",
) -> SparseScene:
    """Basis pursuit min ||b||_1 s.t. ||A b - y||_2 <= eps, via ADMM.

    Splitting: b = z carries the l1 term, s = A b - y lives in the l2 ball of
    radius eps (eps = 0 reproduces the equality-constrained program).  The
    b-update solves (I + A A^H) in the row dimension once per iteration from
    a cached Cholesky factor; the factor is penalty-free, so the usual
    residual-balancing penalty updates cost nothing.  When the residuals have
    not met ``tol`` after ``max_iter`` sweeps, raises
    :class:`NonConvergenceError` (``on_limit="raise"``) or returns the last
    iterate (``on_limit="return"``).
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if on_limit not in ("raise", "return"):
        raise ValueError(f"on_limit must be 'raise' or 'return', got {on_limit!r}")
    A = dic.A
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"snapshot length {y.shape[0]} != dictionary rows {A.shape[0]}")
    n_rows, n_cols = A.shape
    gram = A @ A.conj().T
    chol = np.linalg.cholesky(np.eye(n_rows) + gram)

    def solve_normal(rhs: np.ndarray) -> np.ndarray:
        # (I + A^H A)^{-1} rhs = rhs - A^H (I + A A^H)^{-1} A rhs
        w = A @ rhs
        w = solve_triangular(chol, w, lower=True)
        w = solve_triangular(chol.conj().T, w, lower=False)
        return rhs - A.conj().T @ w

    z = np.zeros(n_cols, dtype=np.complex128)
    s = np.zeros(n_rows, dtype=np.complex128)
    u1 = np.zeros(n_cols, dtype=np.complex128)
    u2 = np.zeros(n_rows, dtype=np.complex128)
    y_scale = max(1.0, float(np.linalg.norm(y)))
    converged = False
    adapts_left = 30
    for it in range(1, max_iter + 1):
        b = solve_normal((z - u1) + A.conj().T @ (y + s - u2))
        Ab = A @ b
        z_prev, s_prev = z, s
        v = b + u1
        mag = np.abs(v)
        thresh = 1.0 / rho
        z = np.where(mag > thresh, (1.0 - thresh / np.maximum(mag, 1e-300)) * v, 0.0)
        w = Ab - y + u2
        wn = float(np.linalg.norm(w))
        s = w if wn <= eps else (eps / wn) * w
        r1 = b - z
        r2 = Ab - y - s
        u1 = u1 + r1
        u2 = u2 + r2
        prim = max(float(np.linalg.norm(r1)), float(np.linalg.norm(r2)))
        dual = rho * max(
            float(np.linalg.norm(z - z_prev)), float(np.linalg.norm(s - s_prev))
        )
        if prim <= tol * y_scale and dual <= tol * y_scale:
            converged = True
            break
        # residual balancing: grow/shrink the penalty, rescale scaled duals.
        # The update count is capped so the penalty is eventually constant,
        # which is what the fixed-penalty convergence guarantee needs; an
        # uncapped scheme can cycle forever on poorly scaled problems.
        if it % 10 == 0 and adapts_left > 0:
            if prim > 10.0 * dual:
                rho *= 2.0
                u1 *= 0.5
                u2 *= 0.5
                adapts_left -= 1
            elif dual > 10.0 * prim:
                rho *= 0.5
                u1 *= 2.0
                u2 *= 2.0
                adapts_left -= 1
    if not converged and on_limit == "raise":
        raise NonConvergenceError(
            f"ADMM basis pursuit: residuals ({prim:.3e}, {dual:.3e}) above "
            f"{tol:.1e} * {y_scale:.3g} after {max_iter} iterations"
        )
    keep = np.abs(z) > support_threshold * max(np.abs(z).max(), 1e-300)
    support = tuple(int(i) for i in np.nonzero(keep)[0])
    return SparseScene(
        support=support,
        coeffs=z[list(support)],
        residual_norm=float(np.linalg.norm(A @ z - y)),
        n_columns=n_cols,
        iterations=it,
    )


# ----------------------------------------------------------------------
# grid <-> physical conversions
# ----------------------------------------------------------------------

def grid_to_physical(
    flat_index: int, g: int, cfg: SystemConfig, centered: bool = True
) -> tuple[float, float, float]:
    """(r, v, theta) of a grid column in coarse cell g."""
    N, M, Q = cfg.N, cfg.M, cfg.Q
    n_tilde, rem = divmod(int(flat_index), M * Q)
    m, q = divmod(rem, Q)
    if not 0 <= n_tilde < N:
        raise ValueError(f"flat index {flat_index} out of range({N * M * Q})")
    half = 0.5 if centered else 0.0
    f_v = n_tilde / N - half
    f_r = m / M - half
    f_t = q / Q - half
    r = cell_center(g, cfg) + f_r * cfg.coarse_cell_width
    v = f_v * cfg.wavelength / (2.0 * cfg.T_0)
    sin_t = f_t * cfg.wavelength / cfg.d_r
    if not -1.0 <= sin_t <= 1.0:
        raise ValueError(f"angle bin {q} maps to sin(theta) = {sin_t:.4g}")
    return (r, v, math.asin(sin_t))


def physical_to_grid(
    r: float, v: float, theta: float, cfg: SystemConfig, centered: bool = True
) -> tuple[int, int, int, int]:
    """(g, n_tilde, m, q) of the grid point nearest to a physical triple.

    Rounding is floor(x + 1/2); velocity and angle wrap modulo their
    unambiguous spans, range rounds on the global fine grid so boundary
    offsets resolve to the adjacent coarse cell.
    """
    if not centered:
        raise ValueError("nearest-grid mapping is defined for the centered grid")
    N, M, Q = cfg.N, cfg.M, cfg.Q
    h = math.floor(r / cfg.range_resolution + M / 2.0 + 0.5)
    g, m = divmod(h, M)
    f_v = 2.0 * v * cfg.T_0 / cfg.wavelength
    n_tilde = math.floor((f_v + 0.5) * N + 0.5) % N
    f_t = cfg.d_r * math.sin(theta) / cfg.wavelength
    q = math.floor((f_t + 0.5) * Q + 0.5) % Q
    return (int(g), int(n_tilde), int(m), int(q))


def recovered_targets(scene: SparseScene, g: int, dic: Dictionary) -> list[RecoveredTarget]:
    """Physical-domain view of a solver output for coarse cell g."""
    out = []
    for flat, beta in zip(scene.support, scene.coeffs):
        r, v, theta = grid_to_physical(flat, g, dic.cfg, centered=dic.centered)
        out.append(
            RecoveredTarget(
                r=r, v=v, theta=theta, beta=complex(beta), flat_index=int(flat), cell=int(g)
            )
        )
    return out
