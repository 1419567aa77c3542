"""Inversion of phaseless data: moduli, phases, masking, and synthesis.

The pipeline walks the probe grid and, node by node,

  1. estimates |target transform|^2 from the highest energy available
     (intensities converge to that limit as energy grows),
  2. recovers the phase from the interference with one or two known
     reference scatterers,
  3. masks nodes where the algebra is singular (vanishing moduli,
     degenerate reference pair, failed solves, no data),
  4. inpaints masked nodes from neighbors, band-limits with a smooth
     taper, and transforms back to real space.

With two references the phase is unique; with one reference the law of
cosines leaves two candidates per node, and the pipeline returns both
globally coherent branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import fit_decay
from .exceptions import (
    DegenerateDataError,
    DegenerateFitError,
    GridMismatchError,
    NoDataError,
    SingularNodeError,
)
from .fourier import inverse_transform
from .grids import GridSpec, ScalarField, SpectralField
from .potentials import PotentialSpec, analytic_hat
from .synthesis import FLAG_OK, BackgroundSet, PhaselessDataset

__all__ = [
    "SingularMask",
    "ReconstructionOptions",
    "ReconstructionResult",
    "recover_modulus_sq",
    "recover_phase_two_refs",
    "recover_phase_one_ref",
    "build_mask",
    "reconstruct",
]


@dataclass(frozen=True)
class SingularMask:
    """Per-node trouble flags over a probe grid (flat, row-major).

    target_null: recovered target modulus below threshold (phase is
    meaningless there).  ref_null[j]: reference transform j below
    threshold.  pair_degenerate: the two reference phases agree modulo
    pi, making the two-reference system singular; by construction this
    flag is only raised off the ref_null sets.  out_of_ball: no channel
    reaches the node at the working energy.  solver_failed: synthesis
    flagged the node's channel.
    """

    target_null: np.ndarray
    ref_null: tuple[np.ndarray, ...]
    pair_degenerate: np.ndarray
    out_of_ball: np.ndarray
    solver_failed: np.ndarray
    thresholds: dict

    def __post_init__(self):
        for arr in (self.target_null, self.pair_degenerate, self.out_of_ball,
                    self.solver_failed, *self.ref_null):
            if arr.dtype != np.bool_ or arr.shape != self.target_null.shape:
                raise ValueError("mask arrays must be boolean and congruent")
        if np.any(self.pair_degenerate & np.logical_or.reduce(self.ref_null)):
            raise ValueError("pair degeneracy is defined off the reference zero sets")

    @property
    def any_flag(self) -> np.ndarray:
        flags = self.target_null | self.pair_degenerate | self.out_of_ball | self.solver_failed
        for rn in self.ref_null:
            flags = flags | rn
        return flags

    @property
    def masked_fraction(self) -> float:
        """Fraction of in-ball nodes carrying any flag."""
        reachable = ~self.out_of_ball
        total = int(np.sum(reachable))
        if total == 0:
            return 1.0
        return float(np.sum(self.any_flag & reachable) / total)


@dataclass(frozen=True)
class ReconstructionOptions:
    """Knobs for the inversion pipeline; defaults follow the design notes."""

    spatial_grid: GridSpec | None = None
    estimator: str = "top"
    p_cut: float | None = None
    taper_fraction: float = 0.1
    eps_zero: float | None = None
    eps_pair: float | None = None
    mask_fraction_limit: float = 0.2
    declared_support: PotentialSpec | None = None
    declared_real: bool = False

    def __post_init__(self):
        if self.estimator not in ("top", "richardson"):
            raise ValueError(f"unknown modulus estimator {self.estimator!r}")
        if not 0.0 <= self.taper_fraction < 1.0:
            raise ValueError("taper fraction must lie in [0, 1)")
        if not 0.0 < self.mask_fraction_limit <= 1.0:
            raise ValueError("mask fraction limit must lie in (0, 1]")


@dataclass(frozen=True)
class ReconstructionResult:
    """Recovered spectrum and potential plus the mask that shaped them.

    ``spectrum`` holds the raw recovered transform on the probe grid
    (no band limit applied), so spectral comparisons are not polluted
    by the taper; the band limit enters only the real-space synthesis.
    """

    spectrum: SpectralField
    mask: SingularMask
    potential: ScalarField
    branch: str
    diagnostics: dict = field(default_factory=dict)


def _node_history(ds: PhaselessDataset) -> dict[int, list[tuple[float, int]]]:
    """node -> [(E, row)] sorted by increasing E."""
    hist: dict[int, list[tuple[float, int]]] = {}
    for row, (ch, node) in enumerate(zip(ds.channels, ds.node_index)):
        hist.setdefault(node, []).append((ch.energy, row))
    for entries in hist.values():
        entries.sort()
    return hist


def recover_modulus_sq(
    ds: PhaselessDataset, node: int, j: int = 0, estimator: str = "top"
) -> float:
    """Squared-modulus estimate for column ``j`` at probe node ``node``.

    "top" returns the intensity at the largest energy holding the node
    with an unflagged channel.  "richardson" additionally uses the
    second-largest such energy, extrapolating under the model
    intensity(E) = limit + const/sqrt(E) and clamping at zero; with a
    single usable energy it degrades to "top".
    """
    hist = _node_history(ds).get(node)
    if hist is None:
        raise NoDataError(f"no channel reaches probe node {node}")
    usable = [(E, row) for E, row in hist if ds.flags[row] == FLAG_OK]
    if not usable:
        raise NoDataError(f"all channels at probe node {node} are flagged")
    if j < 0 or j >= ds.values.shape[1]:
        raise ValueError(f"no intensity column {j}")
    if estimator == "top" or len(usable) == 1:
        return float(ds.values[usable[-1][1], j])
    if estimator != "richardson":
        raise ValueError(f"unknown modulus estimator {estimator!r}")
    (ea, ra), (eb, rb) = usable[-2], usable[-1]
    sa, sb = ds.values[ra, j], ds.values[rb, j]
    value = (np.sqrt(eb) * sb - np.sqrt(ea) * sa) / (np.sqrt(eb) - np.sqrt(ea))
    return float(max(value, 0.0))


def recover_phase_two_refs(
    m0: float,
    m1: float,
    m2: float,
    w1hat: complex,
    w2hat: complex,
    eps_zero: float,
    eps_pair: float,
) -> tuple[complex, float]:
    """Phase of the target transform from two reference interferences.

    Solves the 2x2 linear system in (cos, sin) of the unknown phase that
    the two intensity differences induce, then renormalizes onto the
    unit circle.  Returns (unit phase, pre-normalization deviation);
    the deviation is a data-consistency residual, zero for exact data.
    Raises SingularNodeError when any modulus is below ``eps_zero`` or
    the reference phases are degenerate below ``eps_pair``.
    """
    amp0 = np.sqrt(max(m0, 0.0))
    a1, a2 = abs(w1hat), abs(w2hat)
    if amp0 < eps_zero:
        raise SingularNodeError("target modulus below threshold")
    if a1 < eps_zero or a2 < eps_zero:
        raise SingularNodeError("reference transform below threshold")
    b1, b2 = np.angle(w1hat), np.angle(w2hat)
    det = np.sin(b2 - b1)
    # |omega1^2 - omega2^2| = 2 |sin(b2 - b1)| is the caller-facing
    # degeneracy measure; keep the same scale here.
    if 2.0 * abs(det) < eps_pair:
        raise SingularNodeError("reference pair is phase-degenerate at this node")
    r1 = (m1 - m0 - a1 * a1) / (2.0 * amp0 * a1)
    r2 = (m2 - m0 - a2 * a2) / (2.0 * amp0 * a2)
    cos_a = (np.sin(b2) * r1 - np.sin(b1) * r2) / det
    sin_a = (np.cos(b1) * r2 - np.cos(b2) * r1) / det
    length = float(np.hypot(cos_a, sin_a))
    if length == 0.0:
        raise SingularNodeError("degenerate phase system (zero solution)")
    return complex(cos_a / length, sin_a / length), abs(length - 1.0)


def recover_phase_one_ref(
    m0: float,
    m1: float,
    w1hat: complex,
    eps_zero: float,
) -> tuple[float, float, tuple[complex, complex]]:
    """Two-candidate phase recovery from a single reference.

    Returns (cos of the phase offset, clamp amount, (plus, minus))
    where the candidates are exp(i(beta1 +/- arccos(...))) with the
    arccos taken in [0, pi].  Exact data keeps the cosine inside
    [-1, 1]; any excess is clamped and reported.
    """
    amp0 = np.sqrt(max(m0, 0.0))
    a1 = abs(w1hat)
    if amp0 < eps_zero or a1 < eps_zero:
        raise SingularNodeError("modulus below threshold")
    raw = (m1 - m0 - a1 * a1) / (2.0 * amp0 * a1)
    cos_d = min(1.0, max(-1.0, raw))
    clamp = abs(raw - cos_d)
    b1 = np.angle(w1hat)
    delta = np.arccos(cos_d)
    plus = complex(np.exp(1j * (b1 + delta)))
    minus = complex(np.exp(1j * (b1 - delta)))
    return float(cos_d), float(clamp), (plus, minus)


def build_mask(
    ds: PhaselessDataset,
    refs: BackgroundSet,
    moduli: np.ndarray,
    eps_zero: float | None = None,
    eps_pair: float | None = None,
) -> SingularMask:
    """Flag probe nodes where phase recovery is ill-posed.

    ``moduli`` is the (n_nodes, 1 + n_refs) array of recovered squared
    moduli with NaN where no estimate exists.  Thresholds default to
    1e-3 of each quantity's grid maximum.
    """
    pgrid = ds.pgrid
    nodes = pgrid.nodes()
    n_nodes = nodes.shape[0]
    if moduli.shape[0] != n_nodes:
        raise ValueError("moduli rows must cover every probe node")

    no_data = np.isnan(moduli[:, 0])
    top = max(ds.energies)
    in_ball = np.linalg.norm(nodes, axis=1) <= 2.0 * np.sqrt(top)
    out_of_ball = ~in_ball | no_data

    solver_failed = np.zeros(n_nodes, dtype=bool)
    for row in np.nonzero(ds.flags != FLAG_OK)[0]:
        solver_failed[ds.node_index[row]] = True

    amp0 = np.sqrt(np.where(no_data, 0.0, np.maximum(moduli[:, 0], 0.0)))
    scale0 = float(np.max(amp0)) if amp0.size else 0.0
    ez = eps_zero if eps_zero is not None else 1e-3 * scale0
    target_null = in_ball & ~no_data & (amp0 < ez)

    hats = refs.reference_hats(nodes)
    ref_null = []
    for h in hats:
        mag = np.abs(h)
        ez_j = eps_zero if eps_zero is not None else 1e-3 * float(np.max(mag))
        ref_null.append(mag < ez_j)

    pair = np.zeros(n_nodes, dtype=bool)
    ep = eps_pair
    if refs.count == 2:
        mags = [np.abs(h) for h in hats]
        safe = [np.where(m > 0, m, 1.0) for m in mags]
        gap = np.abs((hats[0] / safe[0]) ** 2 - (hats[1] / safe[1]) ** 2)
        if ep is None:
            ep = 1e-3 * max(float(np.max(gap)), 1e-30)
        pair = (gap < ep) & ~(ref_null[0] | ref_null[1])

    return SingularMask(
        target_null=target_null,
        ref_null=tuple(ref_null),
        pair_degenerate=pair,
        out_of_ball=out_of_ball,
        solver_failed=solver_failed,
        thresholds={"eps_zero": ez, "eps_pair": ep},
    )


def _inpaint(values: np.ndarray, good: np.ndarray, fill: np.ndarray, shape) -> np.ndarray:
    """Average each node of ``fill`` from its good neighbors; zero if isolated.

    Single pass: only originally good nodes feed the averages, so the
    result does not depend on traversal order.
    """
    out = values.copy()
    good_grid = good.reshape(shape)
    val_grid = values.reshape(shape)
    dim = len(shape)
    for flat in np.nonzero(fill)[0]:
        multi = np.unravel_index(flat, shape)
        acc = 0.0 + 0.0j
        count = 0
        for offset in np.ndindex(*(3,) * dim):
            if all(o == 1 for o in offset):
                continue
            idx = tuple(m + o - 1 for m, o in zip(multi, offset))
            if all(0 <= i < s for i, s in zip(idx, shape)):
                if good_grid[idx]:
                    acc += val_grid[idx]
                    count += 1
        out[flat] = acc / count if count else 0.0
    return out


def _taper_window(pnorm: np.ndarray, p_cut: float, fraction: float) -> np.ndarray:
    """1 inside, cosine roll-off over the outer ``fraction`` of the cut."""
    inner = p_cut * (1.0 - fraction)
    w = np.zeros_like(pnorm)
    w[pnorm <= inner] = 1.0
    band = (pnorm > inner) & (pnorm <= p_cut)
    if fraction > 0.0:
        w[band] = 0.5 * (1.0 + np.cos(np.pi * (pnorm[band] - inner) / (p_cut - inner)))
    else:
        w[band] = 1.0
    return w


def _recover_all_moduli(ds: PhaselessDataset, estimator: str) -> np.ndarray:
    n_nodes = ds.pgrid.node_count
    out = np.full((n_nodes, ds.values.shape[1]), np.nan)
    for node in set(ds.node_index):
        for j in range(ds.values.shape[1]):
            try:
                out[node, j] = recover_modulus_sq(ds, node, j, estimator)
            except NoDataError:
                break
    return out


def _modulus_decay_diagnostic(ds: PhaselessDataset) -> dict:
    """Spread of per-node intensities against the top energy, fitted."""
    if len(ds.energies) < 5:
        return {"available": False}
    hist = _node_history(ds)
    top = max(ds.energies)
    spreads = {}
    for node, entries in hist.items():
        usable = {E: ds.values[row, 0] for E, row in entries if ds.flags[row] == FLAG_OK}
        if top not in usable:
            continue
        for E, val in usable.items():
            if E != top:
                spreads.setdefault(E, []).append(abs(val - usable[top]))
    pairs = sorted((E, max(v)) for E, v in spreads.items() if v)
    if len(pairs) < 4:
        return {"available": False}
    try:
        slope, intercept = fit_decay([p[0] for p in pairs], [p[1] for p in pairs])
    except DegenerateFitError:
        return {"available": False}
    return {"available": True, "slope": slope, "intercept": intercept,
            "pairs": pairs}


def reconstruct(
    ds: PhaselessDataset,
    refs: BackgroundSet | None = None,
    options: ReconstructionOptions | None = None,
):
    """Run the full inversion pipeline on a phaseless dataset.

    Returns one ReconstructionResult for two references, or a
    (plus, minus) tuple for one reference.  Raises DegenerateDataError
    when more than ``options.mask_fraction_limit`` of reachable nodes
    are masked, which is the signature of a degenerate reference pair
    (for instance two references related by a pure shift).
    """
    opts = options or ReconstructionOptions()
    refs = refs if refs is not None else ds.backgrounds
    if refs is None:
        raise NoDataError("dataset carries no reference scatterers")
    if ds.n_refs != refs.count:
        raise ValueError("reference count differs from dataset columns")
    if not ds.channels:
        raise NoDataError("dataset is empty")

    pgrid = ds.pgrid
    spatial = opts.spatial_grid
    if spatial is None:
        raise ValueError("options.spatial_grid is required for real-space output")
    if spatial.dual().key() != pgrid.key():
        raise GridMismatchError("spatial grid's dual differs from the probe grid")

    moduli = _recover_all_moduli(ds, opts.estimator)
    mask = build_mask(ds, refs, moduli, opts.eps_zero, opts.eps_pair)
    frac = mask.masked_fraction
    if frac > opts.mask_fraction_limit:
        pair_frac = float(np.mean(mask.pair_degenerate))
        hint = (
            " (the reference-pair degeneracy dominates; references related "
            "by a pure shift produce exactly this)"
            if pair_frac > 0.5 * frac
            else ""
        )
        raise DegenerateDataError(
            f"{100.0 * frac:.1f}% of reachable probe nodes are masked{hint}"
        )

    nodes = pgrid.nodes()
    hats = refs.reference_hats(nodes)
    ez = mask.thresholds["eps_zero"]
    ep = mask.thresholds["eps_pair"]
    usable = ~mask.any_flag

    top = max(ds.energies)
    p_cut = opts.p_cut if opts.p_cut is not None else 0.9 * 2.0 * np.sqrt(top)

    diag_common = {
        "masked_fraction": frac,
        "estimator": opts.estimator,
        "p_cut": p_cut,
        "modulus_decay": _modulus_decay_diagnostic(ds),
    }

    if refs.count == 2:
        phases = np.zeros(nodes.shape[0], dtype=complex)
        deviations = np.full(nodes.shape[0], np.nan)
        for node in np.nonzero(usable)[0]:
            z, dev = recover_phase_two_refs(
                moduli[node, 0], moduli[node, 1], moduli[node, 2],
                hats[0][node], hats[1][node], ez, ep,
            )
            phases[node] = z
            deviations[node] = dev
        result = _assemble(
            ds, moduli, phases, usable, mask, spatial, p_cut, opts,
            branch="two-reference",
            diagnostics={
                **diag_common,
                "max_phase_residual": float(np.nanmax(deviations)) if usable.any() else None,
                "mean_phase_residual": float(np.nanmean(deviations)) if usable.any() else None,
            },
        )
        return result

    # Single reference: carry both branches to the end.
    plus = np.zeros(nodes.shape[0], dtype=complex)
    minus = np.zeros(nodes.shape[0], dtype=complex)
    clamps = np.full(nodes.shape[0], np.nan)
    for node in np.nonzero(usable)[0]:
        _, clamp, (zp, zm) = recover_phase_one_ref(
            moduli[node, 0], moduli[node, 1], hats[0][node], ez
        )
        plus[node] = zp
        minus[node] = zm
        clamps[node] = clamp
    diag = {
        **diag_common,
        "max_cosine_clamp": float(np.nanmax(clamps)) if usable.any() else None,
    }
    return (
        _assemble(ds, moduli, plus, usable, mask, spatial, p_cut, opts,
                  branch="one-reference-plus", diagnostics=diag),
        _assemble(ds, moduli, minus, usable, mask, spatial, p_cut, opts,
                  branch="one-reference-minus", diagnostics=diag),
    )


def _assemble(ds, moduli, phases, usable, mask, spatial, p_cut, opts, branch, diagnostics):
    pgrid = ds.pgrid
    nodes = pgrid.nodes()
    amp0 = np.sqrt(np.where(np.isnan(moduli[:, 0]), 0.0, np.maximum(moduli[:, 0], 0.0)))
    raw = np.where(usable, amp0 * phases, 0.0 + 0.0j)

    fill = mask.any_flag & ~mask.out_of_ball
    filled = _inpaint(raw, usable, fill, pgrid.shape)

    spectrum = SpectralField(pgrid, filled.reshape(pgrid.shape), spatial)

    pnorm = np.linalg.norm(nodes, axis=1)
    window = _taper_window(pnorm, p_cut, opts.taper_fraction)
    banded = SpectralField(pgrid, (filled * window).reshape(pgrid.shape), spatial)
    potential = inverse_transform(banded, spatial)

    values = potential.values
    support_mask = None
    if opts.declared_support is not None:
        mesh = spatial.meshgrid()
        keep = np.zeros(spatial.shape, dtype=bool)
        for center, radius in opts.declared_support.support_balls():
            r2 = sum((mesh[a] - center[a]) ** 2 for a in range(spatial.dim))
            keep |= r2 <= radius * radius
        values = np.where(keep, values, 0.0)
        support_mask = keep
        potential = ScalarField(spatial, values, support_mask)

    re_norm = float(np.linalg.norm(values.real))
    im_norm = float(np.linalg.norm(values.imag))
    diagnostics = dict(diagnostics)
    diagnostics["imag_to_real_ratio"] = im_norm / re_norm if re_norm > 0 else np.inf
    if opts.declared_real and re_norm > 0 and im_norm > 0.05 * re_norm:
        diagnostics["realness_warning"] = (
            f"imaginary residue {im_norm / re_norm:.3g} exceeds 5% of the real part"
        )

    return ReconstructionResult(
        spectrum=spectrum,
        mask=mask,
        potential=potential,
        branch=branch,
        diagnostics=diagnostics,
    )
