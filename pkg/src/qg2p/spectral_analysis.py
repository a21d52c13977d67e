"""Spectral post-processing: lifted spectra, Weyl fits, heat traces and
Dirichlet/Robin bracketing checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolve import counting_function, solve
from .graph_core import MetricGraph


class AnalysisError(ValueError):
    pass


def lift_spectrum(one_particle: np.ndarray, count: int,
                  sector: str = "full") -> np.ndarray:
    """Lowest eigenvalues of the two-particle operator with non-interacting
    conditions: sums lam_n + lam_m of one-particle eigenvalues, with n <= m
    (boson), n < m (fermion), or all ordered pairs (full)."""
    lam = np.sort(np.asarray(one_particle, dtype=float))
    if sector == "full":
        sums = np.add.outer(lam, lam).ravel()
    elif sector == "boson":
        i, j = np.triu_indices(len(lam))
        sums = lam[i] + lam[j]
    elif sector == "fermion":
        i, j = np.triu_indices(len(lam), k=1)
        sums = lam[i] + lam[j]
    else:
        raise AnalysisError(f"unknown sector {sector!r}")
    sums = np.sort(sums)
    if count > len(sums):
        raise AnalysisError(
            f"need {count} lifted eigenvalues but only {len(sums)} sums are "
            "reliable; supply more one-particle eigenvalues")
    # Sums using the largest one-particle eigenvalue may miss smaller
    # combinations outside the supplied range; stay below that ceiling.
    ceiling = lam[-1] + lam[0]
    reliable = sums[sums <= ceiling]
    if count > len(reliable):
        raise AnalysisError(
            f"only {len(reliable)} lifted eigenvalues are complete below the "
            "truncation ceiling; supply more one-particle eigenvalues")
    return reliable[:count]


@dataclass(frozen=True)
class WeylReport:
    slope: float
    target: float
    relative_error: float
    window: tuple
    n_used: int

    @property
    def ok(self) -> bool:
        return np.isfinite(self.relative_error)


def _slope_fit(xs: np.ndarray, ns: np.ndarray) -> float:
    # Least squares for N ~ slope * x (affine fit, slope extracted).
    Amat = np.vstack([xs, np.ones_like(xs)]).T
    sol, *_ = np.linalg.lstsq(Amat, ns, rcond=None)
    return float(sol[0])


def weyl_fit_two_particle(eigenvalues: np.ndarray, g: MetricGraph,
                          sector: str = "full", window: tuple = None,
                          h_max: float = None) -> WeylReport:
    """Fit N(lam) ~ slope * lam over a window and compare the slope against
    the area term: L^2 / 4pi for the full operator, L^2 / 8pi per sector."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    total = g.total_length
    target = total**2 / (4.0 * np.pi) if sector == "full" else total**2 / (8.0 * np.pi)

    lo = window[0] if window else max(lam[0], 0.0)
    hi = window[1] if window else lam[-1]
    if h_max is not None:
        hi = min(hi, (np.pi / (4.0 * h_max)) ** 2)
    xs = np.array([v for v in lam if lo <= v <= hi])
    if len(xs) < 30:
        raise AnalysisError(
            f"only {len(xs)} eigenvalues in the fit window [{lo:.3g}, {hi:.3g}]; "
            "need at least 30")
    ns = np.array([counting_function(lam, v) for v in xs], dtype=float)
    slope = _slope_fit(xs, ns)
    return WeylReport(slope=slope, target=target,
                      relative_error=abs(slope - target) / target,
                      window=(float(lo), float(hi)), n_used=len(xs))


def weyl_fit_one_particle(eigenvalues: np.ndarray, g: MetricGraph,
                          window: tuple = None,
                          h_max: float = None) -> WeylReport:
    """Fit N(k) ~ slope * k with k = sqrt(lam) against L / pi."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    ks = np.sqrt(np.clip(lam, 0.0, None))
    target = g.total_length / np.pi
    lo = window[0] if window else ks[0]
    hi = window[1] if window else ks[-1]
    if h_max is not None:
        hi = min(hi, np.pi / (4.0 * h_max))
    xs = np.array([v for v in ks if lo <= v <= hi])
    if len(xs) < 30:
        raise AnalysisError(
            f"only {len(xs)} eigenvalues in the fit window [{lo:.3g}, {hi:.3g}]; "
            "need at least 30")
    ns = np.array([counting_function(ks, v) for v in xs], dtype=float)
    slope = _slope_fit(xs, ns)
    return WeylReport(slope=slope, target=target,
                      relative_error=abs(slope - target) / target,
                      window=(float(lo), float(hi)), n_used=len(xs))


def heat_trace(eigenvalues: np.ndarray, t: float) -> dict:
    """Truncated heat trace sum(exp(-lam t)) plus a crude tail estimate
    from the last eigenvalue and the Weyl density it implies."""
    if t <= 0:
        raise AnalysisError("heat trace needs t > 0")
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    value = float(np.exp(-lam * t).sum())
    lam_max = lam[-1]
    # local mean spacing near the truncation point
    tail_n = min(len(lam) - 1, 20)
    spacing = (lam[-1] - lam[-1 - tail_n]) / tail_n if tail_n > 0 else np.inf
    tail = float(np.exp(-lam_max * t) / (spacing * t)) if np.isfinite(spacing) else 0.0
    return {"value": value, "tail_estimate": tail, "t": float(t),
            "n_eigenvalues": len(lam)}


@dataclass(frozen=True)
class BracketingReport:
    ok: bool
    n_checked: int
    max_lower_violation: float
    max_upper_violation: float
    counting_ok: bool


def bracketing_check(robin_eigs: np.ndarray, target_eigs: np.ndarray,
                     dirichlet_eigs: np.ndarray, n: int,
                     rel_slack: float = 1e-9) -> BracketingReport:
    """Verify mu_n(Robin) <= mu_n <= mu_n(Dirichlet) for the first n levels,
    plus the implied reversal of the counting functions."""
    r = np.sort(np.asarray(robin_eigs))[:n]
    m = np.sort(np.asarray(target_eigs))[:n]
    d = np.sort(np.asarray(dirichlet_eigs))[:n]
    if min(len(r), len(m), len(d)) < n:
        raise AnalysisError(f"need {n} eigenvalues in each spectrum")
    scale = np.maximum(1.0, np.abs(m))
    low = np.max((r - m) / scale)
    up = np.max((m - d) / scale)
    ok = low <= rel_slack and up <= rel_slack

    counting_ok = True
    for lam in np.concatenate([r, m, d]):
        nd = counting_function(d, lam)
        nm = counting_function(m, lam)
        nr = counting_function(r, lam)
        if not (nd <= nm <= nr):
            counting_ok = False
            break
    return BracketingReport(ok=bool(ok), n_checked=n,
                            max_lower_violation=float(max(low, 0.0)),
                            max_upper_violation=float(max(up, 0.0)),
                            counting_ok=counting_ok)


def bracketing_run(g: MetricGraph, m, mesh, n_max: int,
                   sector: str = "full") -> BracketingReport:
    """Assemble and solve the map together with its two comparison
    operators on the same mesh, then check the sandwich.

    Lower comparison: no constraints and boundary map L_max times the
    identity; upper comparison: full Dirichlet.
    """
    from .bc_maps import constant_map
    from .form_assembly import assemble_two_particle
    from .symmetry import assemble_symmetric_form

    dim = m.dim
    l_max = m.L_max()
    robin = constant_map(np.zeros((dim, dim)), l_max * np.eye(dim))
    dirichlet = constant_map(np.eye(dim), np.zeros((dim, dim)))
    sign = {"full": None, "boson": +1, "fermion": -1}[sector]

    def spectrum(bmap):
        form = assemble_two_particle(g, bmap, mesh)
        if sign is not None:
            form = assemble_symmetric_form(form, sign)
        k = min(n_max + 5, form.nreduced)
        return solve(form, k).eigenvalues

    return bracketing_check(spectrum(robin), spectrum(m),
                            spectrum(dirichlet), n_max)
