"""Quantile calibration of the selection constants and frozen defaults.

Each constant is the smallest value on a logarithmic candidate ladder for
which, under a null model where every candidate level is unbiased, the rule
selects a level above the coarsest one in at most ``1 - q`` of replicates.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .functionals import calibrated_defaults, quadratic_triple
from .lepski import CANDIDATES, build_grid, calibrate_copt
from .supnorm import (
    _lepski_sup,
    build_window,
    calibrate_constant,
    density_adaptive,
    density_truncation,
    scaling_fit,
)
from .ustat import Dataset
from .wavelets import family_from_config, holder_coeff_norm, project


def defaults():
    """Calibrated constants shipped with the package."""
    return calibrated_defaults()


def _const(v):
    return lambda x: np.full(len(x), v)


def calibrate_c_opt(n=1000, reps=200, q=0.95, seed=0, family="haar", grid_mode="span", c=1.5):
    """Null: binary Y with E(Y|X) = 1/2, uniform design, exact nuisances."""
    fam = family_from_config(family)
    grid = build_grid(n, 1, c, grid_mode)
    triple = quadratic_triple(_const(1.0), _const(0.5), 10.0)

    def model(rng):
        x = rng.random(n)
        y = (rng.random(n) < 0.5).astype(float)
        return Dataset(x, y), triple, fam

    cal = calibrate_copt(model, grid, reps, q, np.random.default_rng(seed))
    return {"value": cal.value, "attained": cal.attained, "exceed_rate": _keys(cal.exceed_rate),
            "n": n, "reps": reps, "target_quantile": q, "seed": seed, "grid_mode": grid_mode}


def _keys(rates):
    return {repr(float(k)): v for k, v in rates.items()}


def _sup_run(n, window, fam, weights_fn):
    def run(rng):
        x = rng.random((n, 1))
        w = weights_fn(rng, n)
        levels = window.levels()
        cands = {l: scaling_fit(fam, l, x, w) for l in levels}
        gl = window.hi + 2

        def over(C):
            chosen, _, _ = _lepski_sup(cands, levels, C, n, 1, gl)
            return chosen > window.lo

        return over

    return run


def calibrate_c_star(n=2000, reps=200, q=0.95, seed=0, family="haar", gamma=(0.5, 0.9)):
    """Null: uniform design density."""
    fam = family_from_config(family)
    win = build_window(n, 1, gamma[0], gamma[1], fam.base_level)
    run = _sup_run(n, win, fam, lambda rng, m: np.ones(m))
    C, ok, rates = calibrate_constant(run, reps, q, np.random.default_rng(seed))
    return {"value": C, "attained": ok, "exceed_rate": _keys(rates), "n": n, "reps": reps,
            "target_quantile": q, "seed": seed, "window": [win.lo, win.hi]}


def calibrate_c_dstar(n=2000, reps=200, q=0.95, seed=0, family="haar", beta=(0.1, 0.9)):
    """Null: binary W with constant mean 1/2, uniform design passed exactly."""
    fam = family_from_config(family)
    win = build_window(n, 1, beta[0], beta[1], fam.base_level)
    run = _sup_run(n, win, fam, lambda rng, m: (rng.random(m) < 0.5).astype(float))
    C, ok, rates = calibrate_constant(run, reps, q, np.random.default_rng(seed))
    return {"value": C, "attained": ok, "exceed_rate": _keys(rates), "n": n, "reps": reps,
            "target_quantile": q, "seed": seed, "window": [win.lo, win.hi]}


def holder_radius(fits, beta, level):
    """Largest Hölder coefficient norm over fitted functions, projected at ``level``."""
    fam = family_from_config("haar")
    return max(holder_coeff_norm(project(fam, level, f, 1), beta) for f in fits)


def calibrate_holder_radius(sampler, n, reps, beta, seed, C_star, B_L=0.25, B_U=2.0, gamma=(0.5, 0.9),
                            inflate=2.0):
    """Pre-registered: ``inflate`` times the max norm of truncated density fits over ``reps`` draws."""
    fam = family_from_config("haar")
    win = build_window(n, 1, gamma[0], gamma[1], fam.base_level)
    rng = np.random.default_rng(seed)
    fits = []
    for _ in range(reps):
        x = sampler(rng, n)
        fits.append(density_adaptive(x, fam, win, C_star, density_truncation(B_L, B_U)))
    return inflate * holder_radius(fits, beta, win.hi), win


def truncation_constant(beta, M, reps=400, seed=12345, max_level=8, B_L=0.25, B_U=2.0, inflate=2.0):
    """Frozen ``C(M, beta)`` bounding the norm of truncated Hölder functions.

    Functions are drawn from the Hölder generator with offset ``(B_L + B_U)/2``
    and passed through the density clamp ``[B_L, B_U]``.
    """
    from .simulate import sample_holder_function  # local: simulate imports this module's users

    fam = family_from_config("haar")
    tm = density_truncation(B_L, B_U)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(reps):
        h = sample_holder_function(beta, M, 1, max_level, rng, fam, offset=0.5 * (B_L + B_U))
        t = project(fam, max_level, lambda x: tm(h(x)), 1)
        worst = max(worst, holder_coeff_norm(t, beta))
    return inflate * worst


def calibrate_all(n=1000, reps=200, q=0.95, seed=0):
    if reps < 50:
        raise ContractError("calibration needs reps >= 50")
    return {
        "C_opt": calibrate_c_opt(n, reps, q, seed),
        "C_star": calibrate_c_star(n, reps, q, seed + 1),
        "C_dstar": calibrate_c_dstar(n, reps, q, seed + 2),
        "candidates": [float(c) for c in CANDIDATES],
    }


def default_constant(name):
    return float(defaults()[name]["value"])


def log_candidates():
    return [float(c) for c in CANDIDATES]


__all__ = [
    "calibrate_all",
    "calibrate_c_dstar",
    "calibrate_c_opt",
    "calibrate_c_star",
    "calibrate_holder_radius",
    "default_constant",
    "defaults",
    "holder_radius",
    "log_candidates",
    "truncation_constant",
]
