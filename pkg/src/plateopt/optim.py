"""Bounded Nelder-Mead minimization of spectrum losses on the surrogate.

Bounds (+-20% of the start point per free variable) are enforced exactly by
a sine-squared coordinate transform, so the simplex itself runs
unconstrained. The evaluation budget is 200 per free variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import surrogate as sg
from .errors import ObjectiveNaN
from .geometry import (
    N_OUTLINE,
    N_PARAMS,
    N_THICKNESS,
    PlateParams,
    ReferencePlate,
    realize,
)
from .oracle import DEFAULT_RESOLUTION, discretize, solve_modes

BOX_HALFWIDTH = 0.2
BUDGET_PER_VAR = 200

LOSS_KINDS = ("ratio_target", "mode_target", "spectrum_mean_abs", "mean_shift")

FAMILY_INDICES = {
    "outline": np.arange(0, N_OUTLINE),
    "thickness": np.arange(N_OUTLINE, N_OUTLINE + N_THICKNESS),
    "material": np.arange(N_OUTLINE + N_THICKNESS, N_PARAMS),
}


@dataclass(frozen=True)
class LossSpec:
    """Target function over a predicted spectrum."""

    kind: str
    alpha: float | None = None        # ratio_target
    beta: float | None = None         # mode_target
    mode_index: int | None = None     # mode_target, 1-based
    f_ref: np.ndarray | None = None   # spectrum_mean_abs / mean_shift

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "ratio_target":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("ratio_target needs alpha > 0")
        elif self.kind == "mode_target":
            if self.beta is None or not 1 <= (self.mode_index or 0) <= 10:
                raise ValueError("mode_target needs beta and mode_index in 1..10")
        else:
            f = np.asarray(self.f_ref, dtype=float)
            if f.shape != (10,) or np.any(f <= 0):
                raise ValueError("reference spectrum must be 10 positive values")
            object.__setattr__(self, "f_ref", f)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "mode_index": self.mode_index,
            "f_ref": None if self.f_ref is None else np.asarray(self.f_ref).tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LossSpec":
        return cls(
            kind=d["kind"],
            alpha=d.get("alpha"),
            beta=d.get("beta"),
            mode_index=d.get("mode_index"),
            f_ref=d.get("f_ref"),
        )


def f52(freqs: np.ndarray) -> float:
    return float(freqs[4] / freqs[1])


def loss_eval(spec: LossSpec, freqs: np.ndarray) -> float:
    """Evaluate the loss on a 10-vector of frequencies (Hz)."""
    freqs = np.asarray(freqs, dtype=float)
    if spec.kind == "ratio_target":
        return (spec.alpha - f52(freqs)) ** 2
    if spec.kind == "mode_target":
        return float((spec.beta - freqs[spec.mode_index - 1]) ** 2)
    if spec.kind == "spectrum_mean_abs":
        return float(np.mean(np.abs(freqs - spec.f_ref) / spec.f_ref))
    # mean_shift
    return float(abs(freqs.mean() - spec.f_ref.mean()) / spec.f_ref.mean())


def box_transform(u: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo + (hi - lo) * np.sin(u) ** 2


def box_transform_inv(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    frac = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return np.arcsin(np.sqrt(frac))


@dataclass
class OptimizationRun:
    """Setup plus (after minimize) the outcome of one bounded search."""

    free_idx: np.ndarray
    start: np.ndarray               # full parameter vector
    lo: np.ndarray                  # bounds over the free coordinates
    hi: np.ndarray
    budget: int
    trace: list = field(default_factory=list)   # (eval count, best loss)
    n_evals: int = 0
    best_x: np.ndarray | None = None            # free coordinates
    best_loss: float = np.inf
    status: str = "pending"
    predicted_freqs: np.ndarray | None = None
    spec: LossSpec | None = None

    @property
    def best_vector(self) -> np.ndarray:
        x = self.start.copy()
        x[self.free_idx] = self.best_x
        return x

    @property
    def best_params(self) -> PlateParams:
        return PlateParams.from_vector(self.best_vector)

    def to_json_dict(self) -> dict:
        return {
            "free_idx": self.free_idx.tolist(),
            "start": self.start.tolist(),
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "budget": self.budget,
            "trace": [[int(c), float(l)] for c, l in self.trace],
            "n_evals": self.n_evals,
            "best_x": None if self.best_x is None else self.best_x.tolist(),
            "best_loss": self.best_loss,
            "status": self.status,
            "predicted_freqs": None
            if self.predicted_freqs is None
            else self.predicted_freqs.tolist(),
            "spec": None if self.spec is None else self.spec.to_json_dict(),
        }


class _BudgetExhausted(Exception):
    pass


def minimize(
    objective,
    run: OptimizationRun,
    simplex_tol: float = 1e-6,
    loss_tol: float = 1e-10,
) -> OptimizationRun:
    """Nelder-Mead with standard coefficients in sine-squared coordinates.

    Every evaluated point lies inside [lo, hi]; the counter never exceeds
    run.budget. Hitting the budget is a normal completion.
    """
    lo, hi = run.lo, run.hi
    x0 = run.start[run.free_idx]
    d = len(x0)

    def evaluate(u):
        if run.n_evals >= run.budget:
            raise _BudgetExhausted
        x = box_transform(u, lo, hi)
        val = float(objective(x))
        if np.isnan(val):
            raise ObjectiveNaN("objective returned NaN")
        run.n_evals += 1
        if val < run.best_loss:
            run.best_loss = val
            run.best_x = x
        run.trace.append((run.n_evals, run.best_loss))
        return val

    u0 = box_transform_inv(x0, lo, hi)
    simplex = [u0]
    for i in range(d):
        xi = x0.copy()
        step = 0.05 * 0.5 * (hi[i] - lo[i])
        xi[i] = min(xi[i] + step, hi[i])
        simplex.append(box_transform_inv(xi, lo, hi))
    simplex = np.asarray(simplex)

    try:
        fvals = np.array([evaluate(u) for u in simplex])
        while True:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            spread = np.max(np.abs(simplex[1:] - simplex[0]))
            if spread < simplex_tol or fvals[-1] - fvals[0] < loss_tol:
                run.status = "converged"
                break

            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            refl = centroid + 1.0 * (centroid - worst)
            f_refl = evaluate(refl)
            if f_refl < fvals[0]:
                exp = centroid + 2.0 * (centroid - worst)
                f_exp = evaluate(exp)
                if f_exp < f_refl:
                    simplex[-1], fvals[-1] = exp, f_exp
                else:
                    simplex[-1], fvals[-1] = refl, f_refl
            elif f_refl < fvals[-2]:
                simplex[-1], fvals[-1] = refl, f_refl
            else:
                if f_refl < fvals[-1]:
                    cont = centroid + 0.5 * (refl - centroid)
                else:
                    cont = centroid + 0.5 * (worst - centroid)
                f_cont = evaluate(cont)
                if f_cont < min(f_refl, fvals[-1]):
                    simplex[-1], fvals[-1] = cont, f_cont
                else:  # shrink toward the best vertex
                    for i in range(1, d + 1):
                        simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                        fvals[i] = evaluate(simplex[i])
    except _BudgetExhausted:
        run.status = "budget_exhausted"

    return run


def resolve_free_indices(free) -> np.ndarray:
    """Accept family names, an iterable of names, or explicit indices."""
    if isinstance(free, str):
        free = [free]
    idx: list[int] = []
    for item in free:
        if isinstance(item, str):
            if item not in FAMILY_INDICES:
                raise ValueError(f"unknown family {item!r}")
            idx.extend(FAMILY_INDICES[item].tolist())
        else:
            idx.append(int(item))
    out = np.unique(np.asarray(idx, dtype=int))
    if len(out) == 0:
        raise ValueError("no free variables selected")
    if out.min() < 0 or out.max() >= N_PARAMS:
        raise ValueError("free variable index out of range")
    return out


def make_run(start: PlateParams, free, spec: LossSpec | None = None) -> OptimizationRun:
    free_idx = resolve_free_indices(free)
    x0 = start.to_vector()
    base = x0[free_idx]
    lo = np.minimum(base * (1 - BOX_HALFWIDTH), base * (1 + BOX_HALFWIDTH))
    hi = np.maximum(base * (1 - BOX_HALFWIDTH), base * (1 + BOX_HALFWIDTH))
    return OptimizationRun(
        free_idx=free_idx,
        start=x0,
        lo=lo,
        hi=hi,
        budget=BUDGET_PER_VAR * len(free_idx),
        spec=spec,
    )


def optimize_design(
    model: sg.SurrogateModel,
    spec: LossSpec,
    start: PlateParams,
    free,
    gate_override: bool = False,
) -> OptimizationRun:
    """Minimize the loss on surrogate predictions over the chosen variables."""
    sg.ensure_gated(model, override=gate_override)
    run = make_run(start, free, spec)
    full = run.start.copy()

    def objective(xfree):
        full[run.free_idx] = xfree
        freqs = model.predict_matrix(full[None, :])[0]
        return loss_eval(spec, freqs)

    minimize(objective, run)
    run.predicted_freqs = model.predict_matrix(run.best_vector[None, :])[0]
    return run


def cross_validate(
    run: OptimizationRun,
    ref: ReferencePlate,
    resolution: float = DEFAULT_RESOLUTION,
) -> dict:
    """Re-solve the optimized design with the oracle and report errors."""
    if run.best_x is None:
        raise ValueError("run has no result to validate")
    geometry = realize(run.best_params, ref)
    modal = solve_modes(discretize(geometry, resolution))
    pred = run.predicted_freqs
    rel = np.abs(modal.freqs - pred) / modal.freqs
    return {
        "oracle_freqs": modal.freqs.tolist(),
        "predicted_freqs": pred.tolist(),
        "rel_error_per_mode": rel.tolist(),
        "max_rel_error": float(rel.max()),
        "f52_oracle": f52(modal.freqs),
        "f52_predicted": f52(pred),
        "f52_rel_error": abs(f52(modal.freqs) - f52(pred)) / f52(modal.freqs),
    }
