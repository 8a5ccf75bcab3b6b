"""Masked rank-R CP decomposition of a third-order complex tensor via
row-wise weighted alternating least squares.

Each sweep updates the three factor matrices in turn; a factor row is the
exact weighted least-squares solution over the entries its mask marks
reliable, solved through the normal equations with an optional ridge term.
Rows with no reliable data (or a singular normal matrix at zero ridge) are
left unchanged and flagged rather than filled with garbage.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor_ops import khatri_rao, unfold


@dataclass
class CPModel:
    """Factor matrices (g, h, p) of a rank-R third-order CP model."""

    g: np.ndarray
    h: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        ranks = {self.g.shape[1], self.h.shape[1], self.p.shape[1]}
        if len(ranks) != 1:
            raise ValueError(f"factor column counts differ: {ranks}")
        for name, f in (("g", self.g), ("h", self.h), ("p", self.p)):
            if not np.isfinite(f).all():
                raise ValueError(f"factor {name} contains non-finite entries")

    @property
    def rank(self):
        return self.g.shape[1]

    @property
    def shape(self):
        return (self.g.shape[0], self.h.shape[0], self.p.shape[0])

    def factors(self):
        return [self.g, self.h, self.p]

    def to_tensor(self):
        return np.einsum("ir,jr,kr->ijk", self.g, self.h, self.p)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the alternating solver.

    ridge=None derives the regularizer from the data scale
    (1e-8 * mean squared amplitude of the observed tensor).
    """

    rank: int
    max_iters: int = 500
    rel_fit_tol: float = 1e-8
    ridge: float | None = None
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank={self.rank}, must be >= 1")
        if not self.rel_fit_tol > 0:
            raise ValueError("rel_fit_tol must be positive")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.restarts < 1:
            raise ValueError("need at least one restart")


@dataclass
class SolveReport:
    """What happened during a solve: sweeps used, final weighted residual,
    convergence flag, which restart won and the residual of every restart."""

    iterations: int
    residual: float
    converged: bool
    restart_chosen: int
    restart_residuals: list = field(default_factory=list)
    degenerate_rows: int = 0


def init_factors(shape, rank, seed=0):
    """Random CP model: entries i.i.d. standard circular complex Gaussian,
    deterministic for a given seed."""
    if rank < 1:
        raise ValueError(f"rank={rank}, must be >= 1")
    rng = np.random.default_rng(seed)

    def draw(n):
        return (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2)

    i1, i2, i3 = shape
    return CPModel(g=draw(i1), h=draw(i2), p=draw(i3))


def _update_rows(t_m, w_m, z, old, ridge):
    """Row-wise weighted normal equations g_i^T (Z^T W_i Z* + ridge I) = T_i W_i Z*.

    Returns the updated factor and the indices of degenerate rows (no
    reliable entries, or singular system) that were left unchanged.
    """
    rank = z.shape[1]
    zc = np.conj(z)
    # lhs[i] = (Z^T W_i Z*)^T assembled row-wise through one GEMM
    pairs = (zc[:, :, None] * z[:, None, :]).reshape(z.shape[0], rank * rank)
    lhs = (w_m @ pairs).reshape(w_m.shape[0], rank, rank)
    b = (t_m * w_m) @ zc
    if ridge:
        lhs = lhs + ridge * np.eye(rank)

    new = old.astype(complex, copy=True)
    flagged = list(np.flatnonzero(w_m.sum(axis=1) == 0))
    solvable = np.flatnonzero(w_m.sum(axis=1) > 0)
    if solvable.size:
        try:
            sol = np.linalg.solve(lhs[solvable], b[solvable, :, None])[..., 0]
            finite = np.isfinite(sol).all(axis=1)
            new[solvable[finite]] = sol[finite]
            flagged.extend(solvable[~finite])
        except np.linalg.LinAlgError:
            for i in solvable:
                try:
                    sol_i = np.linalg.solve(lhs[i], b[i, :, None])[:, 0]
                except np.linalg.LinAlgError:
                    flagged.append(i)
                    continue
                if np.isfinite(sol_i).all():
                    new[i] = sol_i
                else:
                    flagged.append(i)
    return new, np.array(sorted(int(i) for i in flagged), dtype=int)


def update_mode(t_obs, mask, model, mode, ridge=0.0):
    """One exact block update of the given factor (0, 1 or 2), holding the
    other two fixed. Returns (new_factor, flagged_row_indices)."""
    if mode not in (0, 1, 2):
        raise ValueError(f"mode must be 0, 1 or 2, got {mode}")
    factors = model.factors()
    others = [factors[m] for m in range(3) if m != mode]
    z = khatri_rao(others[1], others[0])
    t_m = unfold(np.asarray(t_obs), mode)
    w_m = unfold(np.asarray(mask, dtype=float), mode)
    return _update_rows(t_m, w_m, z, factors[mode], ridge)


def weighted_fit(t_obs, mask, model):
    """Frobenius norm of the masked reconstruction error."""
    diff = (model.to_tensor() - np.asarray(t_obs)) * np.asarray(mask, dtype=float)
    return float(np.linalg.norm(diff))


def _masked_fit(t_1, w_1, factors):
    """weighted_fit on precomputed mode-1 unfoldings."""
    recon = factors[0] @ khatri_rao(factors[2], factors[1]).T
    return float(np.linalg.norm((recon - t_1) * w_1))


def observed_entries(mask):
    return int(np.asarray(mask, dtype=bool).sum())


def als_solve(t_obs, mask, opts):
    """Alternating weighted least squares with random restarts.

    Sweeps the three modes until the relative change of the weighted fit
    drops below rel_fit_tol (or the fit hits the numerical floor), up to
    max_iters sweeps; the restart with the smallest final residual wins.
    Non-convergence is reported, not raised.
    """
    t_obs = np.asarray(t_obs, dtype=complex)
    mask_f = np.asarray(mask, dtype=float)
    if t_obs.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got order {t_obs.ndim}")
    if t_obs.shape != mask_f.shape:
        raise ValueError(f"tensor/mask shape mismatch: {t_obs.shape} vs {mask_f.shape}")
    n_obs = observed_entries(mask_f > 0)
    floor = opts.rank * sum(t_obs.shape)
    if n_obs < floor:
        raise ValueError(
            f"only {n_obs} reliable entries, below the identifiability floor {floor}"
        )

    ridge = opts.ridge
    if ridge is None:
        ridge = 1e-8 * float(np.mean(np.abs(t_obs) ** 2))
    fit_scale = float(np.linalg.norm(t_obs * mask_f))
    unfolds = [
        (unfold(t_obs, m), unfold(mask_f, m)) for m in range(3)
    ]

    root = np.random.SeedSequence(opts.seed)
    children = root.spawn(opts.restarts)
    best = None
    restart_residuals = []
    for r, child in enumerate(children):
        factors = init_factors(t_obs.shape, opts.rank, child).factors()
        prev = _masked_fit(unfolds[0][0], unfolds[0][1], factors)
        converged = False
        sweeps = 0
        flagged_last = 0
        for sweeps in range(1, opts.max_iters + 1):
            flagged_last = 0
            for mode in range(3):
                others = [factors[m] for m in range(3) if m != mode]
                z = khatri_rao(others[1], others[0])
                t_m, w_m = unfolds[mode]
                factors[mode], flagged = _update_rows(t_m, w_m, z, factors[mode], ridge)
                flagged_last += flagged.size
            fit = _masked_fit(unfolds[0][0], unfolds[0][1], factors)
            if abs(prev - fit) <= opts.rel_fit_tol * max(prev, 1e-300) or fit <= 1e-12 * fit_scale:
                prev = fit
                converged = True
                break
            prev = fit
        restart_residuals.append(prev)
        if best is None or prev < best[1]:
            best = (CPModel(*factors), prev, converged, sweeps, r, flagged_last)

    model, residual, converged, sweeps, chosen, degenerate = best
    report = SolveReport(
        iterations=sweeps,
        residual=float(residual),
        converged=converged,
        restart_chosen=chosen,
        restart_residuals=[float(x) for x in restart_residuals],
        degenerate_rows=int(degenerate),
    )
    return model, report
