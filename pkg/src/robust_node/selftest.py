"""Quick oracle checks runnable from the command line (``robust-node selftest``).

Each check compares a library routine with an independent computation on
seeded random instances and prints one line.  The full property suites live
in the pytest tree; these are the fast subset.
"""

from __future__ import annotations

import sys

import numpy as np

from .adversary import AdversaryConfig, linearized_robust_cost, worst_case_disturbance
from .model import ModelConfig, endpoints, random_control
from .projector import project_onto_kernel
from .sensitivity import compute_L


def check_sensitivity(rng) -> bool:
    """Central differences of the end-point map converge to L @ du at second order."""
    cfg = ModelConfig()
    ratios = []
    for _ in range(5):
        u = random_control(cfg, rng, 0.5)
        x = rng.uniform(-1, 1, cfg.input_dim)
        du = rng.standard_normal(cfg.control_shape)
        lin = compute_L(u, x, cfg).L @ du.ravel()
        errs = []
        for h in (1e-2, 5e-3):
            fd = (endpoints(u + h * du, x[None], cfg)[0] - endpoints(u - h * du, x[None], cfg)[0]) / (2 * h)
            errs.append(np.linalg.norm(fd - lin))
        ratios.append(errs[0] / errs[1])
    return bool(3.5 <= np.mean(ratios) <= 4.5)


def check_push_through(rng) -> bool:
    """The small-system disturbance equals the normalized full-size solve."""
    worst = 0.0
    for _ in range(5):
        L = rng.standard_normal((2, 40))
        r = rng.standard_normal(2)
        lam = 1.5 * np.linalg.norm(L, 2) ** 2
        gamma = np.linalg.solve(lam * np.eye(40) - L.T @ L, L.T @ r)
        eps = worst_case_disturbance(L, r, AdversaryConfig(lam, 0.1))
        ref = 0.1 * gamma / np.max(np.abs(gamma))
        worst = max(worst, np.linalg.norm(eps - ref) / np.linalg.norm(ref))
    return worst < 1e-8


def check_ascent(rng) -> bool:
    """The disturbance beats random feasible candidates on the linearized objective."""
    for _ in range(5):
        L = rng.standard_normal((1, 60))
        r = rng.standard_normal(1)
        lam = 1.2 * np.linalg.norm(L, 2) ** 2
        eps = worst_case_disturbance(L, r, AdversaryConfig(lam, 0.1))
        best = linearized_robust_cost(L, r, eps, lam, 0.01)
        for _ in range(100):
            cand = rng.uniform(-0.1, 0.1, 60)
            if linearized_robust_cost(L, r, cand, lam, 0.01) > best + 1e-12:
                return False
    return True


def check_projection(rng) -> bool:
    """Projection is idempotent, annihilates the rows and never lengthens."""
    M = rng.standard_normal((3, 50))
    g = rng.standard_normal(50)
    d = project_onto_kernel(M, g)
    return bool(
        np.max(np.abs(M @ d)) < 1e-8 * np.linalg.norm(M) * np.linalg.norm(g)
        and np.allclose(project_onto_kernel(M, d), d, atol=1e-12)
        and np.linalg.norm(d) <= np.linalg.norm(g) + 1e-12
    )


CHECKS = (
    ("sensitivity", check_sensitivity),
    ("push_through", check_push_through),
    ("ascent", check_ascent),
    ("projection", check_projection),
)


def run_selftest(stream=None, seed: int = 0) -> bool:
    stream = stream or sys.stdout
    rng = np.random.default_rng(seed)
    ok = True
    for name, check in CHECKS:
        passed = check(rng)
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}", file=stream)
    return ok
