"""Reflector-on stage: scan synthesis, matched filtering, and on-grid DoA estimation.

The BS beam is fixed toward the reflecting surface while the surface sweeps
conjugate-steering codewords over the spatial square.  After matched
filtering each sample collapses to a scalar whose magnitude peaks when the
swept beam hits the composite direction (arrival-from-BS plus
departure-to-target); subtracting the known arrival angles leaves the
surface-to-target DoA.
"""

from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from ._gridpeaks import top_peaks_1d, top_peaks_2d
from .arrays import SpatialAnglePair, UpaConfig, steering_vector, upa_response
from .channel import (
    PathKind,
    SceneGeometry,
    cascade_power_closed_form,
    channel_b2i,
    channel_bti,
    channel_iti,
    path_gain,
)
from .errors import InvalidArgumentError, UnderResolvedError

SCAN_SUPPRESSION_RADIUS = 1  # beam-grid steps; scan grids are far coarser than the spectrum grid
CASE2_POWER_RATIO = 0.1  # p1/p2 below this is squarely single-bounce dominated


class Stage2Mode(enum.Enum):
    FULL_ECHO = "full"
    CASE1_APPROX = "case1"
    CASE2_APPROX = "case2"


class Regime(enum.Enum):
    CASE1_IRS_DOMINANT = "case1"
    CASE2_DIRECT_DOMINANT = "case2"
    MIXED = "mixed"


@dataclass
class IrsScanPlan:
    """Separable y/z scan codebooks over the endpoint-inclusive beam grids."""

    t2_y: int
    t2_z: int
    mu_grid: np.ndarray      # (t2_y,) beam centers in [-1, 1]
    nu_grid: np.ndarray      # (t2_z,)
    codebook_y: np.ndarray   # (n_y, t2_y) unit-modulus columns
    codebook_z: np.ndarray   # (n_z, t2_z)
    hold_y_index: int        # center codeword held while the other axis sweeps
    hold_z_index: int


@dataclass
class ScanObservation:
    """Matched-filter outputs of one scan, sequential sweeps or the joint grid."""

    mode: str                       # "sequential" or "joint"
    noise_var_effective: float      # N_BS * sigma^2
    y_values: np.ndarray | None = None      # (t2_y,) z-beam held at hold_z_index
    z_values: np.ndarray | None = None      # (t2_z,) y-beam held at best_y_index
    grid_values: np.ndarray | None = None   # (t2_y, t2_z)
    best_y_index: int | None = None


@dataclass
class RegimeReport:
    p1: float
    p2: float
    regime: Regime
    threshold_nr: float


def _scan_grid(t2: int) -> np.ndarray:
    if t2 < 1:
        raise InvalidArgumentError("scan needs at least one beam")
    if t2 == 1:
        return np.array([0.0])
    return np.linspace(-1.0, 1.0, t2)


def build_scan_plan(irs_cfg: UpaConfig, t2_y: int, t2_z: int) -> IrsScanPlan:
    """Conjugate-steering codebooks on mu_i = -1 + 2(i-1)/(t2-1), endpoints inclusive.

    The same grid is used for synthesis and inversion so the two are exact
    inverses.  Fewer than 3 beams on an axis cannot pin down the direction
    and channel coefficient jointly, hence the warning.
    """
    if t2_y < 3 or t2_z < 3:
        warnings.warn(f"scan with {t2_y}x{t2_z} beams is below the 3-beam identifiability minimum",
                      stacklevel=2)
    mu_grid = _scan_grid(t2_y)
    nu_grid = _scan_grid(t2_z)
    codebook_y = np.conj(np.stack([steering_vector(m, irs_cfg.n_y) for m in mu_grid], axis=1))
    codebook_z = np.conj(np.stack([steering_vector(n, irs_cfg.n_z) for n in nu_grid], axis=1))
    return IrsScanPlan(
        t2_y=t2_y, t2_z=t2_z, mu_grid=mu_grid, nu_grid=nu_grid,
        codebook_y=codebook_y, codebook_z=codebook_z,
        hold_y_index=(t2_y - 1) // 2, hold_z_index=(t2_z - 1) // 2,
    )


def cascade_scalar(theta: np.ndarray, b_in: np.ndarray, b_out: np.ndarray) -> complex:
    """b_in^T diag(theta) b_out, the surface-modulated coupling scalar; |q| <= N_r."""
    theta = np.asarray(theta)
    if theta.shape != b_in.shape or theta.shape != b_out.shape:
        raise InvalidArgumentError("theta and the two responses must share one length")
    if np.any(np.abs(np.abs(theta) - 1.0) > 1e-9):
        raise InvalidArgumentError("reflecting elements are phase-only: |theta_i| must be 1")
    return complex(np.sum(b_in * theta * b_out))


def matched_theta(b_in: np.ndarray, b_out: np.ndarray) -> np.ndarray:
    """Phase profile that drives the cascade scalar to its maximum N_r."""
    return np.conj(b_in * b_out)


def composite_angle(geometry: SceneGeometry, irs_index: int, target_index: int) -> SpatialAnglePair:
    """Arrival-from-BS plus departure-to-target spatial angles at the surface."""
    aoa = geometry.bs_irs_aoa(irs_index)
    dep = geometry.irs_target_doa(irs_index, target_index)
    return SpatialAnglePair(aoa.mu + dep.mu, aoa.nu + dep.nu)


def case1_amplitude(geometry: SceneGeometry, irs_index: int, target_index: int,
                    p_bs_watts: float) -> complex:
    """alpha = sqrt(P N_BS) N_BS beta_B2I^2 beta_ITI (double-bounce scalar gain)."""
    n_bs = geometry.n_bs
    b_b2i = path_gain(PathKind.B2I, geometry, irs_index=irs_index).value
    b_iti = path_gain(PathKind.ITI, geometry, irs_index=irs_index, target_index=target_index).value
    return np.sqrt(p_bs_watts * n_bs) * n_bs * b_b2i**2 * b_iti


def case2_amplitude(geometry: SceneGeometry, irs_index: int, target_index: int,
                    p_bs_watts: float) -> tuple[complex, complex]:
    """(alpha_tilde, b): single-bounce scalar gain and the BS beam-mismatch factor."""
    n_bs = geometry.n_bs
    b_b2i = path_gain(PathKind.B2I, geometry, irs_index=irs_index).value
    b_bti = path_gain(PathKind.BTI, geometry, irs_index=irs_index, target_index=target_index).value
    alpha_t = 2.0 * np.sqrt(p_bs_watts * n_bs) * b_b2i * b_bti
    a_irs = upa_response(geometry.bs_irs_aod(irs_index), geometry.bs_upa)
    a_tgt = upa_response(geometry.bs_target_doa(target_index), geometry.bs_upa)
    b = complex(np.vdot(a_irs, a_tgt))
    return alpha_t, b


def _beam_gains(geometry: SceneGeometry, irs_index: int, plan: IrsScanPlan):
    """Per-target steering products u^T(angle) w for every codeword of each axis."""
    cfg = geometry.irs_upa[irs_index]
    gains = []
    for k in range(len(geometry.targets)):
        comp = composite_angle(geometry, irs_index, k)
        gy = steering_vector(comp.mu, cfg.n_y) @ plan.codebook_y
        gz = steering_vector(comp.nu, cfg.n_z) @ plan.codebook_z
        gains.append((gy, gz))
    return gains


def _model_values(geometry, irs_index, plan, mode, p_bs_watts, y_idx, z_idx):
    """Noiseless matched-filter samples at beam index pairs (y_idx[i], z_idx[i])."""
    gains = _beam_gains(geometry, irs_index, plan)
    out = np.zeros(len(y_idx), dtype=complex)
    for k in range(len(geometry.targets)):
        gy, gz = gains[k]
        if mode is Stage2Mode.CASE2_APPROX:
            alpha_t, b = case2_amplitude(geometry, irs_index, k, p_bs_watts)
            out += alpha_t * b * gy[y_idx] * gz[z_idx]
        else:
            alpha = case1_amplitude(geometry, irs_index, k, p_bs_watts)
            out += alpha * gy[y_idx] ** 2 * gz[z_idx] ** 2
    return out


def _full_echo_values(geometry, irs_index, plan, p_bs_watts, y_idx, z_idx, noise_var, rng):
    """Dense-channel synthesis of the three reflected terms plus filtered noise."""
    n_bs = geometry.n_bs
    a_irs = upa_response(geometry.bs_irs_aod(irs_index), geometry.bs_upa)
    w_bs = np.sqrt(p_bs_watts / n_bs) * np.conj(a_irs)
    fa = np.conj(a_irs)  # matched filter row a^H
    h_b2i = channel_b2i(geometry, irs_index)
    h_itis = [channel_iti(geometry, irs_index, k) for k in range(len(geometry.targets))]
    h_btis = [channel_bti(geometry, irs_index, k) for k in range(len(geometry.targets))]
    v0 = h_b2i @ w_bs
    g1 = fa @ h_b2i.T
    u2s = [h @ w_bs for h in h_btis]
    g3s = [fa @ h.T for h in h_btis]
    out = np.zeros(len(y_idx), dtype=complex)
    for s, (i, j) in enumerate(zip(y_idx, z_idx)):
        theta = np.kron(plan.codebook_y[:, i], plan.codebook_z[:, j])
        tv0 = theta * v0
        val = 0.0 + 0.0j
        for h_iti, u2, g3 in zip(h_itis, u2s, g3s):
            val += g1 @ (theta * (h_iti @ tv0))
            val += g1 @ (theta * u2)
            val += g3 @ tv0
        if noise_var > 0:
            noise = np.sqrt(noise_var / 2.0) * (rng.standard_normal(n_bs) + 1j * rng.standard_normal(n_bs))
            val += fa @ noise
        out[s] = val
    return out


def synthesize_stage2(geometry: SceneGeometry, irs_index: int, plan: IrsScanPlan,
                      noise_var: float, seed: int,
                      mode: Stage2Mode = Stage2Mode.CASE1_APPROX,
                      p_bs_watts: float = 1.0, joint: bool = False,
                      hold_best_y: bool = True) -> ScanObservation:
    """Matched-filter samples for a scan, sequential (t2_y + t2_z) or joint (t2_y * t2_z).

    The BS beam is sqrt(P/N_BS) a*(arrival direction of the surface) throughout.
    Sequential sweeps hold the companion axis at the center codeword for the
    y sweep, then hold the noisy-best y beam for the z sweep; with several
    targets pass hold_best_y=False to keep the center hold, otherwise the
    strongest target's beam suppresses everyone else's elevation peak.
    Approximate modes draw the filtered noise directly at variance
    N_BS * sigma^2.
    """
    rng = np.random.default_rng(seed)
    n_bs = geometry.n_bs
    eff_var = n_bs * noise_var

    def noisy(y_idx, z_idx):
        if mode is Stage2Mode.FULL_ECHO:
            return _full_echo_values(geometry, irs_index, plan, p_bs_watts,
                                     y_idx, z_idx, noise_var, rng)
        vals = _model_values(geometry, irs_index, plan, mode, p_bs_watts, y_idx, z_idx)
        if noise_var > 0:
            vals = vals + np.sqrt(eff_var / 2.0) * (
                rng.standard_normal(len(vals)) + 1j * rng.standard_normal(len(vals)))
        return vals

    if joint:
        ii, jj = np.meshgrid(np.arange(plan.t2_y), np.arange(plan.t2_z), indexing="ij")
        grid = noisy(ii.ravel(), jj.ravel()).reshape(plan.t2_y, plan.t2_z)
        return ScanObservation(mode="joint", noise_var_effective=eff_var, grid_values=grid)

    y_idx = np.arange(plan.t2_y)
    y_vals = noisy(y_idx, np.full(plan.t2_y, plan.hold_z_index))
    best_y = int(np.argmax(np.abs(y_vals) ** 2))
    hold_y = best_y if hold_best_y else plan.hold_y_index
    z_idx = np.arange(plan.t2_z)
    z_vals = noisy(np.full(plan.t2_z, hold_y), z_idx)
    return ScanObservation(mode="sequential", noise_var_effective=eff_var,
                           y_values=y_vals, z_values=z_vals, best_y_index=hold_y)


def classify_regime(geometry: SceneGeometry, irs_index: int, target_index: int) -> RegimeReport:
    """Compare the double-bounce power p1 against the single-bounce power p2.

    threshold_nr is the element count where the two closed forms cross,
    sqrt(2) beta_BTI / (beta_ITI beta_B2I); when the target is equidistant
    from the BS and the surface this reduces to sqrt(2) / beta_B2I.
    """
    p1, p2 = cascade_power_closed_form(geometry, irs_index, target_index)
    b_b2i = abs(path_gain(PathKind.B2I, geometry, irs_index=irs_index).value)
    b_iti = abs(path_gain(PathKind.ITI, geometry, irs_index=irs_index, target_index=target_index).value)
    b_bti = abs(path_gain(PathKind.BTI, geometry, irs_index=irs_index, target_index=target_index).value)
    threshold = np.sqrt(2.0) * b_bti / (b_iti * b_b2i)
    if p1 >= p2:
        regime = Regime.CASE1_IRS_DOMINANT
    elif p1 <= CASE2_POWER_RATIO * p2:
        regime = Regime.CASE2_DIRECT_DOMINANT
    else:
        regime = Regime.MIXED
    return RegimeReport(p1=p1, p2=p2, regime=regime, threshold_nr=float(threshold))


def scan_estimate(obs: ScanObservation, plan: IrsScanPlan, bs_irs_doa: SpatialAnglePair,
                  k: int = 1) -> list[SpatialAnglePair]:
    """Map the strongest beams back to surface-to-target DoAs.

    Sequential mode argmaxes each sweep independently; for k > 1 the k!
    pairings of y-peaks with z-peaks are scored by the summed power product
    and the best kept.  Joint mode takes the top-k 2D peaks.  The known
    arrival angles are subtracted from the composite grid values.
    """
    pairs: list[tuple[int, int]]
    if obs.mode == "joint":
        power = np.abs(obs.grid_values) ** 2
        pairs = top_peaks_2d(power, k, SCAN_SUPPRESSION_RADIUS)
        if len(pairs) < k:
            raise UnderResolvedError(f"found {len(pairs)} scan peaks, need {k}", found=len(pairs))
    else:
        py = np.abs(obs.y_values) ** 2
        pz = np.abs(obs.z_values) ** 2
        if k == 1:
            pairs = [(int(np.argmax(py)), int(np.argmax(pz)))]
        else:
            y_peaks = top_peaks_1d(py, k, SCAN_SUPPRESSION_RADIUS)
            z_peaks = top_peaks_1d(pz, k, SCAN_SUPPRESSION_RADIUS)
            found = min(len(y_peaks), len(z_peaks))
            if found < k:
                raise UnderResolvedError(f"found {found} scan peaks, need {k}", found=found)
            best_score, best_perm = -np.inf, None
            for perm in itertools.permutations(range(k)):
                score = sum(py[y_peaks[m]] * pz[z_peaks[perm[m]]] for m in range(k))
                if score > best_score:
                    best_score, best_perm = score, perm
            pairs = [(y_peaks[m], z_peaks[best_perm[m]]) for m in range(k)]
    return [SpatialAnglePair(float(plan.mu_grid[i]) - bs_irs_doa.mu,
                             float(plan.nu_grid[j]) - bs_irs_doa.nu) for i, j in pairs]


def sequential_codewords(plan: IrsScanPlan) -> list[np.ndarray]:
    """Nominal per-sample phase vectors of a sequential scan (center holds)."""
    words = [np.kron(plan.codebook_y[:, i], plan.codebook_z[:, plan.hold_z_index])
             for i in range(plan.t2_y)]
    words += [np.kron(plan.codebook_y[:, plan.hold_y_index], plan.codebook_z[:, j])
              for j in range(plan.t2_z)]
    return words


def joint_codewords(plan: IrsScanPlan) -> list[np.ndarray]:
    """Per-sample phase vectors of a joint scan, row-major over (y, z) beams."""
    return [np.kron(plan.codebook_y[:, i], plan.codebook_z[:, j])
            for i in range(plan.t2_y) for j in range(plan.t2_z)]
