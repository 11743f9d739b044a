"""How far the scaled stationary disturbance falls below the best point of the sup-norm ball.

For random sensitivities at the default scale, compares the linearized robust
objective of ``worst_case_disturbance`` with (a) projected gradient ascent over
the whole ball, (b) the best sign vertex rho*sign(L^T r) and (c) random
feasible disturbances.

    python3 scripts/adversary_gap.py --instances 20
"""

import argparse

import numpy as np

from robust_node.adversary import AdversaryConfig, linearized_robust_cost, worst_case_disturbance
from robust_node.model import ModelConfig, random_control
from robust_node.sensitivity import compute_L


def ascent(L, r, lam, dt, rho, iters=500):
    z = np.zeros(L.shape[1])
    best = linearized_robust_cost(L, r, z, lam, dt)
    step = rho
    for _ in range(iters):
        grad = 2 * L.T @ (r + L @ z) - 2 * lam * dt * z
        z = np.clip(z + step * grad / np.max(np.abs(grad)), -rho, rho)
        best = max(best, linearized_robust_cost(L, r, z, lam, dt))
        step *= 0.99
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=20)
    parser.add_argument("--rho", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=202)
    args = parser.parse_args()
    cfg = ModelConfig()
    rng = np.random.default_rng(args.seed)
    print(f"{'stationary':>11} {'ascent':>9} {'vertex':>9} {'random max':>10} {'gap %':>7}")
    gaps = []
    for _ in range(args.instances):
        u = random_control(cfg, rng, rng.uniform(0.1, 1.0))
        L = compute_L(u, rng.uniform(-1, 1, 2), cfg).L
        r = rng.standard_normal(1)
        lam = 1.1 * np.linalg.norm(L, 2) ** 2 * rng.uniform(1.0, 3.0)
        eps = worst_case_disturbance(L, r, AdversaryConfig(lam, args.rho))
        ours = linearized_robust_cost(L, r, eps, lam, cfg.dt)
        best = ascent(L, r, lam, cfg.dt, args.rho)
        vertex = linearized_robust_cost(L, r, args.rho * np.sign(L.T @ r), lam, cfg.dt)
        rand = max(
            linearized_robust_cost(L, r, rng.uniform(-args.rho, args.rho, L.shape[1]), lam, cfg.dt) for _ in range(100)
        )
        gaps.append((best - ours) / abs(best))
        print(f"{ours:11.5f} {best:9.5f} {vertex:9.5f} {rand:10.5f} {100 * gaps[-1]:7.2f}")
    print(f"median gap {100 * np.median(gaps):.2f}%, worst {100 * max(gaps):.2f}%")


if __name__ == "__main__":
    main()
