"""From raw (possibly faulty) snapshots to the incomplete third-order target
tensor and its reliability mask.

The chain is: overlapping subarray partitioning of each arm, sample
cross-correlation over snapshots, conjugate-symmetry augmentation along a
fifth mode of size 2, a sliding split of both spatial modes, and a final
merge into a third-order tensor of shape (Lx0*Lz0, 4, 2*Nx*Nz) whose
noise-free part carries an exact rank-K CP structure. The mask either comes
from blind amplitude thresholding or is propagated from a known fault mask.
"""

from dataclasses import dataclass

import numpy as np

from .array_sim import FaultMask, steering_phase
from .tensor_ops import merge_modes, reverse_conjugate


@dataclass(frozen=True)
class SubarrayConfig:
    """Sliding-subarray sizes for both arms of an M-element L-shaped array.

    l_x / l_z are the subarray lengths; each arm of size M yields
    n_x = M - l_x + 1 (resp. n_z) overlapping subarrays. Sizes must satisfy
    2 <= l <= M-1 so that both the split apertures (l-1) and the subarray
    counts stay nonempty.
    """

    m_elements: int
    l_x: int
    l_z: int

    def __post_init__(self):
        for name, l in (("l_x", self.l_x), ("l_z", self.l_z)):
            if not 2 <= l <= self.m_elements - 1:
                raise ValueError(
                    f"{name}={l} outside [2, {self.m_elements - 1}] for M={self.m_elements}"
                )

    @classmethod
    def default(cls, m_elements):
        """Balanced default: l = (M+1)//2 + 1, clipped to the valid range
        (M=10 gives l=6 and a 25 x 4 x 50 target)."""
        l = min(max((m_elements + 1) // 2 + 1, 2), m_elements - 1)
        return cls(m_elements=m_elements, l_x=l, l_z=l)

    @property
    def n_x(self):
        return self.m_elements - self.l_x + 1

    @property
    def n_z(self):
        return self.m_elements - self.l_z + 1

    @property
    def l_x0(self):
        return self.l_x - 1

    @property
    def l_z0(self):
        return self.l_z - 1

    @property
    def target_shape(self):
        return (self.l_x0 * self.l_z0, 4, 2 * self.n_x * self.n_z)


@dataclass(frozen=True)
class BlindDetector:
    """Adaptive amplitude threshold: keep entries above median/gamma + epsilon."""

    gamma: float = 3.0
    epsilon: float = 1e-12

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class OracleDetector:
    """Mask propagated from the known per-element fault mask."""

    fault_mask: FaultMask


@dataclass
class TargetTensorPair:
    """Observed target tensor, its binary reliability mask and bookkeeping."""

    t_obs: np.ndarray
    mask: np.ndarray
    config: SubarrayConfig
    missing_fraction: float

    def __post_init__(self):
        if self.t_obs.shape != self.mask.shape:
            raise ValueError(
                f"tensor shape {self.t_obs.shape} != mask shape {self.mask.shape}"
            )


def missing_fraction(mask):
    return float(1.0 - np.asarray(mask, dtype=float).mean())


def partition_subarrays(y, l):
    """Stack sliding subarrays of length l: out[i, n, t] = y[i + n, t]
    (element p of the arm feeds every cell with i + n = p)."""
    y = np.asarray(y)
    m = y.shape[0]
    if not 1 <= l <= m:
        raise ValueError(f"subarray size {l} outside [1, {m}]")
    n_sub = m - l + 1
    return np.stack([y[n : n + l] for n in range(n_sub)], axis=1)


def cross_correlation(x_t, z_t):
    """Sample cross-correlation of the two subarray tensors over snapshots:
    out[l, n, l', n'] = mean_t x[l, n, t] * conj(z[l', n', t])."""
    x_t = np.asarray(x_t)
    z_t = np.asarray(z_t)
    if x_t.shape[-1] != z_t.shape[-1]:
        raise ValueError(
            f"snapshot counts differ: {x_t.shape[-1]} vs {z_t.shape[-1]}"
        )
    n = x_t.shape[-1]
    return np.einsum("lnt,mpt->lnmp", x_t, np.conj(z_t)) / n


def conjugate_augment(r_xz, cfg):
    """Stack r_xz with its reversed conjugate along a new fifth mode.

    Requires l + n_sub - 1 = M on both axes; that identity is what makes the
    second slab a consistent per-source rescaling of the first.
    """
    r_xz = np.asarray(r_xz)
    if r_xz.ndim != 4:
        raise ValueError(f"expected an order-4 tensor, got order {r_xz.ndim}")
    expected = (cfg.l_x, cfg.n_x, cfg.l_z, cfg.n_z)
    if r_xz.shape != expected:
        raise ValueError(f"shape {r_xz.shape} does not match config {expected}")
    return np.stack([r_xz, reverse_conjugate(r_xz)], axis=-1)


def sliding_split(r5):
    """Split both spatial modes by one step of the sliding-window identity.

    Input shape (l_x, n_x, l_z, n_z, 2); output
    (l_x - 1, 2, l_z - 1, 2, 2 * n_x * n_z) with
    out[i, c, j, e, m] = r5[i + c, n_x, j + e, n_z, v] and
    m = n_x + N_x * n_z + N_x * N_z * v (n_x fastest).
    """
    r5 = np.asarray(r5)
    if r5.ndim != 5 or r5.shape[-1] != 2:
        raise ValueError(f"expected shape (l_x, n_x, l_z, n_z, 2), got {r5.shape}")
    l_x, n_x, l_z, n_z, _ = r5.shape
    if l_x < 2 or l_z < 2:
        raise ValueError("spatial modes must have length >= 2 to split")
    out = np.empty((l_x - 1, 2, l_z - 1, 2, 2 * n_x * n_z), dtype=r5.dtype)
    for c in range(2):
        for e in range(2):
            blk = r5[c : c + l_x - 1, :, e : e + l_z - 1, :, :]
            blk = np.transpose(blk, (0, 2, 1, 3, 4))
            out[:, c, :, e, :] = blk.reshape(
                l_x - 1, l_z - 1, 2 * n_x * n_z, order="F"
            )
    return out


def merge_to_target(q):
    """Merge the split tensor's modes {0,2}, {1,3}, {4} into the third-order
    target; the middle mode always has length 4."""
    q = np.asarray(q)
    if q.ndim != 5:
        raise ValueError(f"expected an order-5 tensor, got order {q.ndim}")
    return merge_modes(q, [[0, 2], [1, 3], [4]])


def detect_mask(t_obs, gamma=3.0, epsilon=1e-12):
    """Blind reliability mask: entry kept iff its amplitude exceeds
    median(all amplitudes)/gamma + epsilon."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    amplitudes = np.abs(np.asarray(t_obs))
    threshold = np.median(amplitudes) / gamma + epsilon
    return amplitudes > threshold


def propagate_fault_mask(mask, cfg):
    """Ground-truth reliability mask: push per-element fault indicators
    through the exact index maps of the construction chain.

    A subarray cell (i, n) on an arm is invalid iff element i + n is dead; a
    cross-correlation entry is invalid iff either of its cells is; the
    reversed-conjugate slab follows the reversed indices; the split and merge
    reuse the same index bijections as the data path.
    """
    if len(mask.m_x) != cfg.m_elements:
        raise ValueError(
            f"mask length {len(mask.m_x)} != configured array size {cfg.m_elements}"
        )
    vx = np.empty((cfg.l_x, cfg.n_x))
    vz = np.empty((cfg.l_z, cfg.n_z))
    mx = np.asarray(mask.m_x, dtype=float)
    mz = np.asarray(mask.m_z, dtype=float)
    for i in range(cfg.l_x):
        vx[i] = mx[i : i + cfg.n_x]
    for i in range(cfg.l_z):
        vz[i] = mz[i : i + cfg.n_z]
    valid4 = np.einsum("ln,mp->lnmp", vx, vz)
    valid5 = np.stack([valid4, np.flip(valid4)], axis=-1)
    return merge_to_target(sliding_split(valid5)) > 0.5


def build_target(snapshots, cfg, detector=None):
    """Run the full construction chain on observed snapshots and attach the
    reliability mask from the chosen detector (blind by default)."""
    if detector is None:
        detector = BlindDetector()
    m = snapshots.m_elements
    if m != cfg.m_elements:
        raise ValueError(f"snapshot array size {m} != configured {cfg.m_elements}")
    x_t = partition_subarrays(snapshots.x_obs, cfg.l_x)
    z_t = partition_subarrays(snapshots.z_obs, cfg.l_z)
    r5 = conjugate_augment(cross_correlation(x_t, z_t), cfg)
    t_obs = merge_to_target(sliding_split(r5))

    if isinstance(detector, BlindDetector):
        mask = detect_mask(t_obs, detector.gamma, detector.epsilon)
    elif isinstance(detector, OracleDetector):
        mask = propagate_fault_mask(detector.fault_mask, cfg)
    else:
        raise TypeError(f"unknown detector {detector!r}")
    return TargetTensorPair(
        t_obs=t_obs,
        mask=mask,
        config=cfg,
        missing_fraction=missing_fraction(mask),
    )


def ideal_cross_correlation(sources, cfg):
    """Closed-form snapshot-count limit of the subarray cross-correlation:
    the exact expectation for uncorrelated unit-covariance waveforms."""
    out = np.zeros((cfg.l_x, cfg.n_x, cfg.l_z, cfg.n_z), dtype=complex)
    for s in sources:
        theta = steering_phase(s.elevation_theta_deg)
        phi = steering_phase(s.azimuth_phi_deg)
        a_x = theta ** np.arange(1, cfg.l_x + 1)
        b_x = theta ** np.arange(cfg.n_x)
        a_z = phi ** np.arange(cfg.l_z)
        b_z = phi ** np.arange(cfg.n_z)
        out += s.power * np.einsum(
            "l,n,m,p->lnmp", a_x, b_x, np.conj(a_z), np.conj(b_z)
        )
    return out


def ideal_factors(sources, cfg):
    """Exact CP factors (G, H, P) of the noise-free target tensor.

    Column k ties together the merged virtual-aperture response, the 4-entry
    angle vector [1, Theta, Phi^-1, Theta*Phi^-1] used for extraction, and
    the merged equivalent-signal vector scaled by the source power.
    """
    m = cfg.m_elements
    k = len(sources)
    g = np.zeros((cfg.l_x0 * cfg.l_z0, k), dtype=complex)
    h = np.zeros((4, k), dtype=complex)
    p = np.zeros((2 * cfg.n_x * cfg.n_z, k), dtype=complex)
    for idx, s in enumerate(sources):
        theta = steering_phase(s.elevation_theta_deg)
        phi = steering_phase(s.azimuth_phi_deg)
        a_x0 = theta ** np.arange(1, cfg.l_x)
        a_z0_conj = phi ** -np.arange(cfg.l_z - 1)
        c_vec = np.array([1.0, theta])
        e_vec = np.array([1.0, 1.0 / phi])
        b_x = theta ** np.arange(cfg.n_x)
        b_z_conj = phi ** -np.arange(cfg.n_z)
        u_vec = np.array([1.0, theta ** (-m - 1) * phi ** (m - 1)])
        g[:, idx] = np.kron(a_z0_conj, a_x0)
        h[:, idx] = np.kron(e_vec, c_vec)
        p[:, idx] = s.power * np.kron(u_vec, np.kron(b_z_conj, b_x))
    return g, h, p


def ideal_target(sources, cfg):
    """Noise-free target tensor built directly from the exact CP factors."""
    g, h, p = ideal_factors(sources, cfg)
    return np.einsum("ir,jr,kr->ijk", g, h, p)
