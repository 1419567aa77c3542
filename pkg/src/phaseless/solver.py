"""Outgoing-wave field solver and scattering amplitudes.

The total field for incident plane wave e^{i k.x} satisfies

    psi(x) = e^{i k.x} + integral_D G(x - y, |k|) v(y) psi(y) dy,

discretized on the potential's grid with midpoint weights except at the
singular diagonal cell, which carries the closed-form equal-measure
integral of the kernel (see greens.singular_cell_weight).  The fixed
point is found by direct iteration

    psi_{m+1} = incident + K psi_m,

each application of K being one zero-padded FFT convolution.  The same
weights drive the dense direct solve, restricted to the support nodes
(columns of K vanish off the support), so both methods solve the exact
same linear system and can be cross-checked to tight tolerance.
At high energy the iteration contracts with rate O(E^{-1/2}); on
divergence the solver falls back to the dense route when the support is
small enough.

The scattering amplitude is the weighted quadrature

    f(k, l) = (2 pi)^(-d) * integral_D e^{-i l.y} v(y) psi(y) dy,

and with psi replaced by the incident wave it collapses to the
potential's transform at p = k - l (first-order approximation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional
import warnings

import numpy as np

from .exceptions import (
    EnergyShellError,
    SolverConvergenceError,
    UnresolvedGridError,
)
from .greens import far_field_coefficient, outgoing_green, singular_cell_weight
from .grids import GridSpec, ScalarField
from .potentials import PotentialSpec, analytic_hat

__all__ = [
    "WaveVector",
    "SolverConfig",
    "SolverReport",
    "plane_wave",
    "solve_lippmann_schwinger",
    "scattering_amplitude",
    "born_amplitude",
    "far_field_check",
]


@dataclass(frozen=True)
class WaveVector:
    """Incident wave vector; energy is |k|^2 and must be positive."""

    k: tuple[float, ...]

    def __post_init__(self):
        k = tuple(float(v) for v in np.asarray(self.k, dtype=float).reshape(-1))
        if len(k) not in (2, 3):
            raise ValueError("wave vector must have 2 or 3 components")
        object.__setattr__(self, "k", k)
        if not self.energy > 0:
            raise ValueError("wave vector energy must be positive")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.k, dtype=float)

    @property
    def energy(self) -> float:
        return float(sum(v * v for v in self.k))

    @property
    def magnitude(self) -> float:
        return float(np.sqrt(self.energy))


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 200
    resolution_factor: float = 8.0
    method: str = "auto"  # auto | born | dense
    fallback: bool = True
    dense_limit: int = 3000  # max support nodes for the dense route

    def __post_init__(self):
        if self.method not in ("auto", "born", "dense"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True)
class SolverReport:
    method: str  # born-iteration | dense-direct
    iterations: int
    residual: float
    converged: bool
    contraction_ratio: Optional[float] = field(default=None)


# --- kernel application ------------------------------------------------------

_KERNEL_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
_KERNEL_CACHE_LIMIT = 32


def _kernel_tables(grid: GridSpec, kmag: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature weights of G on the 2x zero-padded grid, and their FFT.

    Weights: midpoint value G(offset)*cell_volume off the diagonal, the
    equal-measure closed-form integral at offset zero.  The kernel is
    truncated at the padded box, which covers every source-target offset
    inside the original box, so the circular convolution below realizes
    the aperiodic sum exactly.  The dense direct route indexes the same
    weight table, so both methods share identical discrete operators.
    """
    key = (grid.key(), float(kmag))
    cached = _KERNEL_CACHE.get(key)
    if cached is not None:
        return cached
    pad = 2 * grid.n
    offs = np.arange(pad)
    offs[offs > pad // 2] -= pad
    r2 = np.zeros((pad,) * grid.dim)
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = pad
        r2 = r2 + (offs * grid.spacing[a]).reshape(shape) ** 2
    r = np.sqrt(r2)
    origin = (0,) * grid.dim
    r[origin] = 1.0  # placeholder, overwritten below
    if grid.dim == 2:
        from scipy.special import hankel1

        weights = (-0.25j * hankel1(0, kmag * r)) * grid.cell_volume
    else:
        weights = (-np.exp(1j * kmag * r) / (4.0 * np.pi * r)) * grid.cell_volume
    weights[origin] = singular_cell_weight(kmag, grid.dim, grid.cell_volume)
    spectrum = np.fft.fftn(weights)
    if len(_KERNEL_CACHE) >= _KERNEL_CACHE_LIMIT:
        _KERNEL_CACHE.pop(next(iter(_KERNEL_CACHE)))
    _KERNEL_CACHE[key] = (weights, spectrum)
    return weights, spectrum


def _apply_kernel(source: np.ndarray, spectrum: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Aperiodic convolution of the weight kernel with ``source``."""
    pad_shape = spectrum.shape
    buf = np.zeros(pad_shape, dtype=np.complex128)
    buf[tuple(slice(0, grid.n) for _ in range(grid.dim))] = source
    conv = np.fft.ifftn(np.fft.fftn(buf) * spectrum)
    return conv[tuple(slice(0, grid.n) for _ in range(grid.dim))]


def plane_wave(grid: GridSpec, k: WaveVector) -> np.ndarray:
    """e^{i k.x} sampled on the grid."""
    phase = np.zeros(grid.shape)
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = grid.n
        phase = phase + (grid.axis(a) * k.k[a]).reshape(shape)
    return np.exp(1j * phase)


def _check_resolution(grid: GridSpec, k: WaveVector, cfg: SolverConfig) -> None:
    hmax = max(grid.spacing)
    limit = 2.0 * np.pi / (cfg.resolution_factor * k.magnitude)
    if hmax > limit:
        raise UnresolvedGridError(
            f"grid spacing {hmax:.4g} exceeds {limit:.4g} needed to resolve "
            f"energy {k.energy:.4g} at resolution factor {cfg.resolution_factor}"
        )


def _dense_solve(
    v: ScalarField,
    k: WaveVector,
    weights_tab: np.ndarray,
    spectrum: np.ndarray,
    cfg: SolverConfig,
) -> np.ndarray:
    """Direct solve of the support-restricted system, extended to the grid.

    For nodes off the support the kernel columns are multiplied by zero
    potential, so the restricted system is exact, not an approximation.
    """
    grid = v.grid
    mask = v.mask & (v.values != 0)
    idx = np.argwhere(mask)
    m = idx.shape[0]
    if m > cfg.dense_limit:
        raise SolverConvergenceError(
            f"dense fallback needs {m} support nodes, limit is {cfg.dense_limit}"
        )
    inc = plane_wave(grid, k)
    if m == 0:
        return inc
    # weight between support nodes via signed index offsets into the padded table
    pad = weights_tab.shape[0]
    diffs = idx[:, None, :] - idx[None, :, :]  # (m, m, dim)
    flat = np.zeros((m, m), dtype=np.int64)
    for a in range(grid.dim):
        flat = flat * pad + (diffs[..., a] % pad)
    w = weights_tab.reshape(-1)[flat]
    vsub = v.values[mask]
    a_mat = np.eye(m, dtype=np.complex128) - w * vsub[None, :]
    psi_sub = np.linalg.solve(a_mat, inc[mask])
    source = np.zeros(grid.shape, dtype=np.complex128)
    source[mask] = vsub * psi_sub
    return inc + _apply_kernel(source, spectrum, grid)


def solve_lippmann_schwinger(
    v: ScalarField, k: WaveVector, cfg: SolverConfig = SolverConfig()
) -> tuple[ScalarField, SolverReport]:
    """Total field for incident plane wave ``k`` over potential ``v``.

    Returns the field on the potential's grid and a report whose residual
    is recomputed independently after the solve (one extra kernel
    application), not the last iterate's update size.
    """
    grid = v.grid
    _check_resolution(grid, k, cfg)
    inc = plane_wave(grid, k)
    inc_norm = float(np.linalg.norm(inc))

    if not np.any(v.values):
        return ScalarField(grid, inc), SolverReport(
            method="born-iteration", iterations=0, residual=0.0, converged=True
        )

    weights_tab, spectrum = _kernel_tables(grid, k.magnitude)

    def true_residual(psi: np.ndarray) -> float:
        resid = psi - inc - _apply_kernel(v.values * psi, spectrum, grid)
        return float(np.linalg.norm(resid)) / inc_norm

    if cfg.method == "dense":
        psi = _dense_solve(v, k, weights_tab, spectrum, cfg)
        return ScalarField(grid, psi), SolverReport(
            method="dense-direct",
            iterations=1,
            residual=true_residual(psi),
            converged=True,
        )

    psi = inc.copy()
    updates: list[float] = []
    rising = 0
    diverged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        nxt = inc + _apply_kernel(v.values * psi, spectrum, grid)
        upd = float(np.linalg.norm(nxt - psi)) / inc_norm
        psi = nxt
        if updates and upd > updates[-1]:
            rising += 1
        else:
            rising = 0
        updates.append(upd)
        if upd <= cfg.tolerance:
            break
        if rising >= 5:
            diverged = True
            break
    else:
        diverged = True

    ratio = None
    if len(updates) >= 2:
        ratios = [b / a for a, b in zip(updates, updates[1:]) if a > 0]
        if ratios:
            ratio = float(np.median(ratios))

    if diverged:
        if cfg.method == "auto" and cfg.fallback:
            psi = _dense_solve(v, k, weights_tab, spectrum, cfg)
            return ScalarField(grid, psi), SolverReport(
                method="dense-direct",
                iterations=iterations,
                residual=true_residual(psi),
                converged=True,
                contraction_ratio=ratio,
            )
        raise SolverConvergenceError(
            f"iteration diverged after {iterations} steps "
            f"(last update {updates[-1]:.3e}); no fallback available"
        )

    return ScalarField(grid, psi), SolverReport(
        method="born-iteration",
        iterations=iterations,
        residual=true_residual(psi),
        converged=True,
        contraction_ratio=ratio,
    )


# --- amplitudes ---------------------------------------------------------------


def _check_shell(k: WaveVector, l: np.ndarray) -> None:
    e_in = k.energy
    e_out = float(np.dot(l, l))
    if abs(e_in - e_out) > 1e-12 * max(e_in, e_out):
        raise EnergyShellError(
            f"in/out energies differ: {e_in!r} vs {e_out!r} "
            f"(relative {abs(e_in - e_out) / max(e_in, e_out):.3e})"
        )


def scattering_amplitude(
    v: ScalarField, psi: ScalarField, k: WaveVector, l
) -> complex:
    """f(k, l) = (2 pi)^(-d) * cell_volume * sum e^{-i l.y} v(y) psi(y).

    ``l`` must lie on the same energy shell as ``k`` (relative 1e-12).
    """
    l = np.asarray(l, dtype=float)
    _check_shell(k, l)
    if v.grid.key() != psi.grid.key():
        raise ValueError("potential and field live on different grids")
    mask = v.mask & (v.values != 0)
    if not np.any(mask):
        return 0.0 + 0.0j
    coords = v.grid.nodes().reshape(v.grid.shape + (v.grid.dim,))
    phase = np.exp(-1j * (coords[mask] @ l))
    total = np.sum(phase * v.values[mask] * psi.values[mask])
    return complex((2.0 * np.pi) ** (-v.grid.dim) * v.grid.cell_volume * total)


def born_amplitude(spec: PotentialSpec, k: WaveVector, l) -> complex:
    """First-order amplitude: the potential's transform at p = k - l."""
    l = np.asarray(l, dtype=float)
    _check_shell(k, l)
    return complex(analytic_hat(spec, k.array - l))


def far_field_check(
    v: ScalarField,
    k: WaveVector,
    cfg: SolverConfig = SolverConfig(),
    directions: Optional[np.ndarray] = None,
    radius: Optional[float] = None,
    psi: Optional[ScalarField] = None,
) -> float:
    """Max relative gap between the radiated far field and the amplitude.

    The total field is evaluated well outside the support through the
    integral representation, stripped of the incident wave, divided by
    c(d,|k|) e^{i|k||x|} / |x|^((d-1)/2), and compared against
    scattering_amplitude at l = |k| x/|x|.  Returns 0 for a zero
    potential.  Warns when the radius is small compared to the support
    diameter (near-field contamination dominates the gap there).
    """
    grid = v.grid
    mask = v.mask & (v.values != 0)
    if not np.any(mask):
        return 0.0
    coords = grid.nodes().reshape(grid.shape + (grid.dim,))
    pts = coords[mask]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diam = float(np.linalg.norm(hi - lo)) + max(grid.spacing)
    if radius is None:
        radius = 50.0 * diam
    if radius < 10.0 * diam:
        warnings.warn(
            f"far-field radius {radius:.3g} is below 10x the support diameter "
            f"{diam:.3g}; the comparison will be polluted by near-field terms",
            stacklevel=2,
        )
    if directions is None:
        if grid.dim == 2:
            ang = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
            directions = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        else:
            raw = np.concatenate([np.eye(3), -np.eye(3), np.ones((1, 3)) / np.sqrt(3)])
            directions = raw
    if psi is None:
        psi, _ = solve_lippmann_schwinger(v, k, cfg)

    kmag = k.magnitude
    coeff = far_field_coefficient(grid.dim, kmag)
    src = v.values[mask] * psi.values[mask]
    amps = []
    ffs = []
    for u in np.atleast_2d(directions):
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u)
        x_far = radius * u
        g_row = outgoing_green(x_far[None, :] - pts, kmag, grid.dim)
        scattered = grid.cell_volume * np.sum(g_row * src)
        f_ff = scattered * radius ** ((grid.dim - 1) / 2.0) / (
            coeff * np.exp(1j * kmag * radius)
        )
        f_amp = scattering_amplitude(v, psi, k, kmag * u)
        ffs.append(f_ff)
        amps.append(f_amp)
    amps = np.asarray(amps)
    ffs = np.asarray(ffs)
    scale = float(np.max(np.abs(amps)))
    if scale == 0.0:
        return float(np.max(np.abs(ffs)))
    return float(np.max(np.abs(ffs - amps)) / scale)
