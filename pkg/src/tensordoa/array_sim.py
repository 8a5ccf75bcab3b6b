"""Synthetic snapshot generator for an L-shaped array of two orthogonal
half-wavelength ULAs, with per-sensor failure masks and additive noise.

Geometry: the x-axis arm occupies positions 1..M (in units of the element
spacing) and the z-axis arm positions 0..M-1, so the arms share no element.
The x-arm phase response of a source at elevation theta is Theta**p for
element p = 1..M with Theta = exp(j*pi*cos(theta)); the z-arm response is
Phi**(p-1) with Phi = exp(j*pi*cos(phi)).
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SourceParams:
    """One far-field narrowband source: angles in degrees, linear power."""

    azimuth_phi_deg: float
    elevation_theta_deg: float
    power: float = 1.0

    def __post_init__(self):
        for name, angle in (
            ("azimuth_phi_deg", self.azimuth_phi_deg),
            ("elevation_theta_deg", self.elevation_theta_deg),
        ):
            if not 0.0 < float(angle) < 180.0:
                raise ValueError(f"{name}={angle} must lie strictly inside (0, 180)")
        if not self.power > 0:
            raise ValueError(f"power={self.power} must be positive")


@dataclass(frozen=True)
class ArrayGeometry:
    """M-element arms at fixed half-wavelength spacing."""

    m_elements: int

    def __post_init__(self):
        if self.m_elements < 4:
            raise ValueError(f"m_elements={self.m_elements}, need at least 4")


@dataclass(frozen=True)
class FaultMask:
    """Binary per-element masks; 1 = functional, 0 = failed."""

    m_x: tuple
    m_z: tuple

    def __post_init__(self):
        for name, m in (("m_x", self.m_x), ("m_z", self.m_z)):
            vals = set(m)
            if not vals <= {0, 1}:
                raise ValueError(f"{name} entries must be 0 or 1")
            if sum(m) == 0:
                raise ValueError(f"{name} leaves no functional element")
        if len(self.m_x) != len(self.m_z):
            raise ValueError("axis masks must have equal length")

    @classmethod
    def full(cls, m_elements):
        return cls((1,) * m_elements, (1,) * m_elements)

    @classmethod
    def from_dead(cls, m_elements, dead_x=(), dead_z=()):
        mx = [1] * m_elements
        mz = [1] * m_elements
        for p in dead_x:
            mx[int(p)] = 0
        for p in dead_z:
            mz[int(p)] = 0
        return cls(tuple(mx), tuple(mz))

    @property
    def dead_x(self):
        return tuple(i for i, v in enumerate(self.m_x) if v == 0)

    @property
    def dead_z(self):
        return tuple(i for i, v in enumerate(self.m_z) if v == 0)


@dataclass
class SnapshotSet:
    """Observed array outputs: M x N complex matrices per arm."""

    x_obs: np.ndarray
    z_obs: np.ndarray

    @property
    def n_snapshots(self):
        return self.x_obs.shape[1]

    @property
    def m_elements(self):
        return self.x_obs.shape[0]


def steering_phase(angle_deg):
    """Unit phasor exp(j*pi*cos(angle)) for an angle in (0, 180) degrees."""
    angle_deg = float(angle_deg)
    if not 0.0 < angle_deg < 180.0:
        raise ValueError(f"angle {angle_deg} outside the open interval (0, 180)")
    return complex(np.exp(1j * np.pi * np.cos(np.deg2rad(angle_deg))))


def x_arm_response(theta_deg, m_elements):
    """Vandermonde response of the x arm: Theta**1 .. Theta**M."""
    return steering_phase(theta_deg) ** np.arange(1, m_elements + 1)


def z_arm_response(phi_deg, m_elements):
    """Vandermonde response of the z arm: Phi**0 .. Phi**(M-1)."""
    return steering_phase(phi_deg) ** np.arange(m_elements)


def _complex_gaussian(rng, shape, variance=1.0):
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def noise_variance(sources, snr_db):
    """Per-element noise variance for a given SNR in dB: mean source power
    over noise power. Returns 0.0 for snr_db = +inf (noise disabled)."""
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    mean_power = float(np.mean([s.power for s in sources]))
    return mean_power / 10.0 ** (float(snr_db) / 10.0)


def generate_snapshots(geometry, sources, n_snapshots, snr_db, mask=None, seed=0):
    """Simulate N snapshots of both arms.

    Waveforms are i.i.d. circular complex Gaussian with the configured source
    powers. The fault mask zeroes the signal contribution of dead elements;
    noise is added to every element, dead ones included. Deterministic for a
    given seed.
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if not sources:
        raise ValueError("need at least one source")
    m = geometry.m_elements
    if mask is None:
        mask = FaultMask.full(m)
    if len(mask.m_x) != m:
        raise ValueError(f"mask length {len(mask.m_x)} != array size {m}")

    rng = np.random.default_rng(seed)
    k = len(sources)
    powers = np.array([s.power for s in sources])
    waveforms = _complex_gaussian(rng, (k, n_snapshots)) * np.sqrt(powers)[:, None]

    ax = np.stack([x_arm_response(s.elevation_theta_deg, m) for s in sources], axis=1)
    az = np.stack([z_arm_response(s.azimuth_phi_deg, m) for s in sources], axis=1)

    mx = np.asarray(mask.m_x, dtype=float)[:, None]
    mz = np.asarray(mask.m_z, dtype=float)[:, None]
    x_obs = mx * (ax @ waveforms)
    z_obs = mz * (az @ waveforms)

    var_n = noise_variance(sources, snr_db)
    if var_n > 0:
        x_obs = x_obs + _complex_gaussian(rng, (m, n_snapshots), var_n)
        z_obs = z_obs + _complex_gaussian(rng, (m, n_snapshots), var_n)
    return SnapshotSet(x_obs=x_obs, z_obs=z_obs)


def random_fault_mask(m_elements, n_faults_x, n_faults_z, seed=0):
    """Distinct uniformly random failed indices per arm, deterministic per seed."""
    if n_faults_x >= m_elements or n_faults_z >= m_elements:
        raise ValueError("fault count must leave at least one functional element")
    rng = np.random.default_rng(seed)
    dead_x = rng.choice(m_elements, size=n_faults_x, replace=False)
    dead_z = rng.choice(m_elements, size=n_faults_z, replace=False)
    return FaultMask.from_dead(m_elements, dead_x, dead_z)
