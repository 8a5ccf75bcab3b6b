"""Paired 2D angle extraction from the 4-row factor matrix, plus scoring
against ground truth.

Column k of the recovered middle factor ideally equals
alpha * [1, Theta_k, Phi_k^-1, Theta_k * Phi_k^-1]; both angles come from
entry ratios, so the per-column scaling alpha cancels and the (theta, phi)
pairing is automatic.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .cp_als import als_solve

MIN_REF_AMPLITUDE = 1e-12


class ExtractionError(RuntimeError):
    """Angle extraction failed for a specific column."""

    def __init__(self, column, message):
        super().__init__(f"column {column}: {message}")
        self.column = column


@dataclass(frozen=True)
class AngleEstimate:
    elevation_theta_deg: float
    azimuth_phi_deg: float
    source_index: int


@dataclass
class ScoredResult:
    """Per-source absolute errors (degrees) after optimal pairing, pooled
    RMSE over both angles of all sources, and the assignment used
    (permutation[j] = estimate index matched to truth j)."""

    theta_errors_deg: list
    phi_errors_deg: list
    rmse_deg: float
    permutation: tuple


@dataclass
class EstimationResult:
    estimates: list
    report: object
    missing_fraction: float
    scored: object = None


def _angle_from_ratio(ratio):
    return float(np.degrees(np.arccos(np.clip(np.angle(ratio) / np.pi, -1.0, 1.0))))


def extract_angles(h_hat):
    """One paired (elevation, azimuth) estimate per column of the 4 x R
    factor: Theta from row2/row1, Phi from inverting row3/row1. Raises
    ExtractionError (with the column index) when a reference entry is too
    small to divide by; never emits NaN."""
    h_hat = np.asarray(h_hat)
    if h_hat.shape[0] != 4:
        raise ValueError(f"expected a 4-row factor, got {h_hat.shape}")
    estimates = []
    for k in range(h_hat.shape[1]):
        col = h_hat[:, k]
        if abs(col[0]) <= MIN_REF_AMPLITUDE:
            raise ExtractionError(k, f"reference entry |h1|={abs(col[0]):.3e} too small")
        theta_term = col[1] / col[0]
        phi_inv = col[2] / col[0]
        if abs(phi_inv) <= MIN_REF_AMPLITUDE:
            raise ExtractionError(k, f"|h3/h1|={abs(phi_inv):.3e} too small to invert")
        estimates.append(
            AngleEstimate(
                elevation_theta_deg=_angle_from_ratio(theta_term),
                azimuth_phi_deg=_angle_from_ratio(1.0 / phi_inv),
                source_index=k,
            )
        )
    return estimates


def cross_ratio_angles(h_hat):
    """Diagnostic-only redundant extraction using the other entry ratios
    (row4/row3 for Theta, inverted row4/row2 for Phi); ideally identical to
    extract_angles, and a useful consistency probe on noisy factors."""
    h_hat = np.asarray(h_hat)
    out = []
    for k in range(h_hat.shape[1]):
        col = h_hat[:, k]
        if abs(col[2]) <= MIN_REF_AMPLITUDE or abs(col[1]) <= MIN_REF_AMPLITUDE:
            raise ExtractionError(k, "cross-ratio reference entry too small")
        phi_inv = col[3] / col[1]
        if abs(phi_inv) <= MIN_REF_AMPLITUDE:
            raise ExtractionError(k, "cross-ratio |h4/h2| too small to invert")
        out.append(
            (
                _angle_from_ratio(col[3] / col[2]),
                _angle_from_ratio(1.0 / phi_inv),
            )
        )
    return out


def match_and_score(estimates, truth):
    """Optimal assignment (exhaustive over permutations, K <= 8) minimizing
    the total squared angular error, then pooled RMSE over both angles."""
    k = len(truth)
    if len(estimates) != k:
        raise ValueError(f"{len(estimates)} estimates vs {k} truth sources")
    if k > 8:
        raise ValueError("exhaustive matching supports at most 8 sources")
    est_theta = np.array([e.elevation_theta_deg for e in estimates])
    est_phi = np.array([e.azimuth_phi_deg for e in estimates])
    true_theta = np.array([s.elevation_theta_deg for s in truth])
    true_phi = np.array([s.azimuth_phi_deg for s in truth])

    # cost[i, j]: estimate i against truth j
    cost = (est_theta[:, None] - true_theta[None, :]) ** 2
    cost = cost + (est_phi[:, None] - true_phi[None, :]) ** 2

    best_perm = None
    best_total = np.inf
    for perm in itertools.permutations(range(k)):
        total = sum(cost[perm[j], j] for j in range(k))
        if total < best_total:
            best_total = total
            best_perm = perm

    theta_errors = [abs(est_theta[best_perm[j]] - true_theta[j]) for j in range(k)]
    phi_errors = [abs(est_phi[best_perm[j]] - true_phi[j]) for j in range(k)]
    return ScoredResult(
        theta_errors_deg=theta_errors,
        phi_errors_deg=phi_errors,
        rmse_deg=float(np.sqrt(best_total / (2 * k))),
        permutation=tuple(best_perm),
    )


def estimate_from_tensor(pair, opts, truth=None):
    """Solve the masked decomposition of a built target pair and extract the
    paired angles; scores against truth when provided."""
    model, report = als_solve(pair.t_obs, pair.mask, opts)
    estimates = extract_angles(model.h)
    scored = match_and_score(estimates, truth) if truth is not None else None
    return EstimationResult(
        estimates=estimates,
        report=report,
        missing_fraction=pair.missing_fraction,
        scored=scored,
    )
