"""Reflector-off stage: echo synthesis and subspace (MUSIC) DoA estimation at the BS.

The BS probes with T1 waveform columns, collects the direct target echoes,
and locates spectrum peaks of 1 / (a^H U_n U_n^H a) over the spatial-angle
square [-1, 1]^2.  The denominator is evaluated through the orthogonal
complement ||a||^2 - ||U_s^H a||^2, which is algebraically identical and lets
the Kronecker structure of the UPA response carry the grid search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._gridpeaks import top_peaks_2d
from .arrays import SpatialAnglePair, UpaConfig, steering_matrix
from .channel import SceneGeometry, channel_btb
from .errors import InvalidArgumentError, UnderResolvedError

DEFAULT_GRID_RESOLUTION = 2e-3
PEAK_SUPPRESSION_RADIUS = 3  # grid steps


@dataclass
class SnapshotBlock:
    """T1 received snapshots plus the noise level and seed that produced them."""

    samples: np.ndarray  # (N_BS, T1) complex
    noise_var: float
    seed: int


@dataclass
class MusicEstimate:
    angles: list[SpatialAnglePair]
    spectrum_peak_values: list[float]
    grid_resolution: float


def synthesize_stage1(geometry: SceneGeometry, probing: np.ndarray,
                      noise_var: float, seed: int) -> SnapshotBlock:
    """Y = (sum_k H_BTB,k) W + N with i.i.d. circular complex Gaussian noise.

    Per-entry noise variance is noise_var (real/imag each noise_var/2);
    deterministic under the seed.
    """
    probing = np.asarray(probing)
    n_bs = geometry.n_bs
    if probing.ndim != 2 or probing.shape[0] != n_bs or probing.shape[1] < 1:
        raise InvalidArgumentError(f"probing must be ({n_bs}, T1>=1), got {probing.shape}")
    h = np.zeros((n_bs, n_bs), dtype=complex)
    for k in range(len(geometry.targets)):
        h += channel_btb(geometry, k)
    y = h @ probing
    if noise_var > 0:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(noise_var / 2.0)
        y = y + scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return SnapshotBlock(samples=y, noise_var=noise_var, seed=seed)


def sample_covariance(block: SnapshotBlock) -> np.ndarray:
    """(1/T1) Y Y^H."""
    y = block.samples
    return (y @ y.conj().T) / y.shape[1]


def signal_noise_subspaces(cov: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigendecompose the Hermitian-symmetrized covariance.

    Returns (eigenvalues descending, U_s with k columns, U_n with the rest).
    """
    n = cov.shape[0]
    if not (0 < k < n):
        raise InvalidArgumentError(f"need 0 < k < {n}, got k={k}")
    sym = 0.5 * (cov + cov.conj().T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    return eigvals, eigvecs[:, :k], eigvecs[:, k:]


def _projection_deficit(u_s: np.ndarray, cfg: UpaConfig,
                        mu_axis: np.ndarray, nu_axis: np.ndarray) -> np.ndarray:
    """||a||^2 - ||U_s^H a||^2 on the (mu, nu) grid; equals a^H U_n U_n^H a."""
    a_mu = steering_matrix(mu_axis, cfg.n_y)
    a_nu = steering_matrix(nu_axis, cfg.n_z)
    n = cfg.n
    power = np.zeros((mu_axis.size, nu_axis.size))
    for col in range(u_s.shape[1]):
        s = u_s[:, col].reshape(cfg.n_y, cfg.n_z)
        c = a_mu @ s.conj() @ a_nu.T
        power += np.abs(c) ** 2
    deficit = n - power
    return np.maximum(deficit, n * 1e-15)


def _axis(resolution: float) -> np.ndarray:
    steps = int(round(2.0 / resolution))
    return np.linspace(-1.0, 1.0, steps + 1)


def music_spectrum(cov: np.ndarray, cfg: UpaConfig, k: int,
                   grid_resolution: float = DEFAULT_GRID_RESOLUTION,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """MUSIC spectrum 1 / (a^H U_n U_n^H a) over [-1, 1]^2.

    Returns (mu_axis, nu_axis, values) with values[i, j] at (mu_axis[i], nu_axis[j]).
    """
    _, u_s, _ = signal_noise_subspaces(cov, k)
    mu_axis = _axis(grid_resolution)
    nu_axis = _axis(grid_resolution)
    return mu_axis, nu_axis, 1.0 / _projection_deficit(u_s, cfg, mu_axis, nu_axis)


def _refine_peak(u_s: np.ndarray, cfg: UpaConfig, mu0: float, nu0: float,
                 step: float, levels: int) -> tuple[float, float, float, float]:
    """Zoom the spectrum around one peak; each level shrinks the step tenfold."""
    value = np.nan
    for _ in range(levels):
        mu_lo, mu_hi = max(-1.0, mu0 - step), min(1.0, mu0 + step)
        nu_lo, nu_hi = max(-1.0, nu0 - step), min(1.0, nu0 + step)
        mu_axis = np.linspace(mu_lo, mu_hi, 21)
        nu_axis = np.linspace(nu_lo, nu_hi, 21)
        deficit = _projection_deficit(u_s, cfg, mu_axis, nu_axis)
        i, j = np.unravel_index(np.argmin(deficit), deficit.shape)
        mu0, nu0 = float(mu_axis[i]), float(nu_axis[j])
        value = 1.0 / float(deficit[i, j])
        step /= 10.0
    return mu0, nu0, value, step


def music_estimate(cov: np.ndarray, cfg: UpaConfig, k: int,
                   grid_resolution: float = DEFAULT_GRID_RESOLUTION,
                   refine_levels: int = 1) -> MusicEstimate:
    """Top-k spectrum peaks with non-maximum suppression and optional local zoom.

    Peaks are the k largest local maxima of the coarse spectrum (suppression
    radius 3 grid steps, ties broken toward the lowest grid index).  Each
    refinement level re-searches a 10x finer local grid around a peak.
    Raises UnderResolvedError when fewer than k peaks exist.
    """
    _, u_s, _ = signal_noise_subspaces(cov, k)
    mu_axis = _axis(grid_resolution)
    nu_axis = _axis(grid_resolution)
    deficit = _projection_deficit(u_s, cfg, mu_axis, nu_axis)
    spectrum = 1.0 / deficit
    peaks = top_peaks_2d(spectrum, k, PEAK_SUPPRESSION_RADIUS)
    if len(peaks) < k:
        raise UnderResolvedError(f"found {len(peaks)} spectrum peaks, need {k}", found=len(peaks))

    angles: list[SpatialAnglePair] = []
    values: list[float] = []
    final_step = grid_resolution
    for i, j in peaks:
        mu0, nu0 = float(mu_axis[i]), float(nu_axis[j])
        val = float(spectrum[i, j])
        if refine_levels > 0:
            mu0, nu0, val, final_step = _refine_peak(u_s, cfg, mu0, nu0, grid_resolution, refine_levels)
        angles.append(SpatialAnglePair(mu0, nu0))
        values.append(val)
    order = np.argsort(values)[::-1]
    return MusicEstimate(
        angles=[angles[int(o)] for o in order],
        spectrum_peak_values=[values[int(o)] for o in order],
        grid_resolution=final_step if refine_levels > 0 else grid_resolution,
    )
