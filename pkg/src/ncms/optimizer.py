"""Choice of the energy split alpha and the number of mimic users L_C.

Two problems are solved:

* bound-constrained: minimise the closed-form error bound subject to the
  ideal entropy log2(L_C+1)/log2(L-1) >= delta;
* simulation-constrained: minimise the Monte Carlo error subject to the
  entropy Dave actually measures being >= delta.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adversary import ideal_normalized_entropy, simulate_attack
from .config import NetworkConfig, validate_config
from .error_analysis import pe_nh_th, pe_th_components, pe_th_curve, bound_terms, _profile_for
from .error_analysis import simulate_pe

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ALPHA_LO, ALPHA_HI = 0.9, 1.0 - 1e-6


class InfeasibleError(ValueError):
    pass


@dataclass
class OptimizationSolution:
    alpha_opt: float
    lc_opt: int
    objective: float
    constraint: float
    delta: float
    meta: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {"delta": self.delta, "alpha": self.alpha_opt, "L_C": self.lc_opt,
                "objective": self.objective, "constraint": self.constraint, **self.meta}


def golden_section(f, a, b, tol=1e-5, max_iter=200):
    """Minimise a unimodal f on [a, b]; returns (x, f(x), evaluations)."""
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while b - a > tol and evals < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        evals += 1
    x = c if fc <= fd else d
    return x, min(fc, fd), evals


def min_even_lc(L: int, delta: float) -> int:
    """Smallest even L_C whose ideal entropy reaches delta."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if L < 4:
        raise ValueError("L must be at least 4")
    # integer test on the exact inequality, no reliance on a rounded power
    lc = max(0, math.ceil((L - 1) ** delta - 1.0 - 1e-9))
    lc += lc % 2
    while lc > 0 and ideal_normalized_entropy(L, lc - 2) >= delta:
        lc -= 2
    while lc <= L - 2 and ideal_normalized_entropy(L, lc) < delta - 1e-12:
        lc += 2
    if lc > L - 2:
        raise InfeasibleError(f"no even L_C <= {L - 2} reaches entropy {delta}")
    return lc


def _bound_cfg(L, L_C, N_C, snr_db, M, base: NetworkConfig | None = None) -> NetworkConfig:
    base = base or NetworkConfig()
    return base.with_(L=L, L_C=L_C, N_C=N_C, snr_db=snr_db, M=M)


def minimize_alpha_bound(L, L_C, N_C=4, snr_db=35.0, M=4, *, base=None, step=1e-3, tol=1e-5):
    """(alpha, bound) minimising the error bound: grid scan, then golden section."""
    cfg = _bound_cfg(L, L_C, N_C, snr_db, M, base)
    grid = np.arange(ALPHA_LO, ALPHA_HI, step)
    grid = np.append(grid, ALPHA_HI)
    vals = pe_th_curve(cfg, grid)
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    f = lambda a: float(pe_th_curve(cfg, a))
    x, fx, evals = golden_section(f, lo, hi, tol=tol)
    if vals[i] < fx:  # golden section never does worse than the grid
        x, fx = float(grid[i]), float(vals[i])
    return float(x), float(fx), {"grid_step": step, "tol": tol, "evaluations": grid.size + evals,
                                 "grid_best": float(vals[i])}


def _mimic_penalty_dominates(cfg: NetworkConfig, alphas) -> bool:
    """True when hb1+hb2 > 2 Pe_NH on the alpha range, so the bound grows with L_C."""
    prof = _profile_for(alphas, cfg)
    _, _, hb1, hb2 = pe_th_components(bound_terms(alphas, cfg.noise_power, cfg.M), prof)
    return bool(np.all(hb1 + hb2 > 2.0 * pe_nh_th(cfg.noise_power, cfg.M)))


def solve_problem2(L, N_C=4, snr_db=35.0, delta=0.7, M=4, *, base=None) -> OptimizationSolution:
    lc_min = min_even_lc(L, delta)
    cfg = _bound_cfg(L, lc_min, N_C, snr_db, M, base)
    alphas = np.linspace(ALPHA_LO, ALPHA_HI, 2001)
    if _mimic_penalty_dominates(cfg, alphas):
        candidates, method = [lc_min], "monotone"
    else:
        candidates, method = list(range(lc_min, L - 1, 2)), "scan"
    best = None
    evaluated = []
    for lc in candidates:
        a, v, meta = minimize_alpha_bound(L, lc, N_C, snr_db, M, base=base)
        evaluated.append((lc, a, v))
        if best is None or v < best[2]:
            best = (lc, a, v, meta)
    lc, a, v, meta = best
    constraint = ideal_normalized_entropy(L, lc)
    if constraint < delta - 1e-12:
        raise InfeasibleError("solution violates the entropy constraint")
    return OptimizationSolution(a, lc, v, constraint, delta,
                                {"problem": 2, "L": L, "snr_db": snr_db, "lc_method": method,
                                 "evaluated": evaluated, **meta})


def solve_problem1(base: NetworkConfig, delta: float, trials: int = 100_000, seed: int = 0, *,
                   frames: int = 2000, alpha_halfwidth: float = 0.003, alpha_points: int = 13,
                   max_evaluations: int = 200, lc_start: int | None = None) -> OptimizationSolution:
    """Simulation-constrained solution.

    L_C is scanned upward from a lower candidate until Dave's measured
    entropy reaches delta; alpha is then searched by Monte Carlo on a grid
    centred on the bound minimiser, reusing the same seed at every alpha.
    ``trials`` is the number of Monte Carlo trials per alpha point.
    """
    base = validate_config(base)
    L = base.L
    t0 = time.time()
    lc0 = lc_start if lc_start is not None else max(0, min_even_lc(L, delta) - 4)
    evaluations = 0
    budget_hit = False
    lc, h = None, None
    scan = []
    for cand in range(lc0, L - 1, 2):
        if evaluations >= max_evaluations:
            budget_hit = True
            break
        a_ref, _, _ = minimize_alpha_bound(L, cand, base.N_C, base.snr_db, base.M, base=base)
        if cand == 0:
            h_c = 0.0
        else:
            h_c = simulate_attack(base.with_(L_C=cand, alpha=a_ref), frames, seed=seed).h_norm
        evaluations += 1
        scan.append((cand, h_c))
        if h_c >= delta:
            lc, h = cand, h_c
            break
    if lc is None:
        if not budget_hit:
            raise InfeasibleError(f"measured entropy never reaches {delta}")
        lc, h = max(scan, key=lambda r: r[1])

    a_ref, _, _ = minimize_alpha_bound(L, lc, base.N_C, base.snr_db, base.M, base=base)
    grid = np.linspace(a_ref - alpha_halfwidth, min(a_ref + alpha_halfwidth, ALPHA_HI), alpha_points)
    pes = []
    for a in grid:
        if evaluations >= max_evaluations:
            budget_hit = True
            break
        pes.append(simulate_pe(base.with_(L_C=lc, alpha=float(a)), trials, seed=seed).pe)
        evaluations += 1
    if pes:
        i = int(np.argmin(pes))
        alpha_opt, objective = float(grid[i]), float(pes[i])
    else:  # budget spent on the L_C scan; fall back to the bound minimiser
        alpha_opt, objective = float(a_ref), float("nan")

    # re-check the constraint at the returned point instead of trusting the scan
    if lc:
        h = simulate_attack(base.with_(L_C=lc, alpha=alpha_opt), frames, seed=seed + 1).h_norm
    return OptimizationSolution(
        alpha_opt, lc, objective, float(h), delta,
        {"problem": 1, "L": L, "snr_db": base.snr_db, "trials_per_alpha": trials,
         "frames": frames, "alpha_grid": grid[:len(pes)].tolist(), "pe_grid": pes,
         "lc_scan": scan, "alpha_bound": a_ref, "evaluations": evaluations,
         "budget_exhausted": budget_hit, "constraint_met": bool(h >= delta),
         "seconds": time.time() - t0},
    )
