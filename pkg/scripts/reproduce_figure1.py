"""Train robust and standard models on the disk task and sweep control disturbances.

Writes a combined report CSV (random disturbances, plus the worst-case sweep
unless --no-adversarial) and prints a compact table.

    python3 scripts/reproduce_figure1.py --out runs/fig1
"""

import argparse
import json
import logging
from dataclasses import asdict
from pathlib import Path

from robust_node.evaluate import write_report
from robust_node.experiment import DiskProtocol, run_disk_experiment, with_train
from robust_node.model import save_control
from robust_node.trainer import config_snapshot, write_history


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/fig1")
    parser.add_argument("--data-seed", type=int, default=0)
    parser.add_argument("--q-train", type=int, default=20)
    parser.add_argument("--inner-tol", type=float, default=0.05)
    parser.add_argument("--samples", type=int, default=16)
    parser.add_argument("--no-adversarial", action="store_true")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    protocol = DiskProtocol(q_train=args.q_train, data_seed=args.data_seed, samples_per_magnitude=args.samples)
    protocol = with_train(protocol, inner_tol=args.inner_tol)
    result = run_disk_experiment(protocol, adversarial=not args.no_adversarial)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.csv", list(result.reports.values()))
    for name, state in (("robust", result.robust), ("standard", result.standard)):
        meta = {
            "mode": name,
            "seed": protocol.train.seed,
            "memorized": state.memorized,
            "failures": state.failures,
            "config": config_snapshot(protocol.model, protocol.train),
        }
        save_control(out / f"{name}.ckpt", state.u, protocol.model, meta=meta)
        write_history(out / f"{name}.history.csv", state.history)
    summary = {"protocol": asdict(protocol), "seconds": result.seconds}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")

    modes = sorted({mode for _, mode in result.reports})
    print(f"train {len(result.train)} points ({int((result.train.y > 0).sum())} inside), test {len(result.test)}")
    print(f"memorized: robust {len(result.robust.memorized)}, standard {len(result.standard.memorized)}")
    for mode in modes:
        print(f"\n{mode} disturbances")
        print(f"{'eps':>6} {'rob acc':>8} {'rob cost':>9} {'std acc':>8} {'std cost':>9}")
        rob, std = result.report("robust", mode), result.report("standard", mode)
        for r, s in zip(rob.rows, std.rows):
            print(f"{r.eps_norm:6.2f} {r.accuracy:8.3f} {r.avg_cost:9.4f} {s.accuracy:8.3f} {s.avg_cost:9.4f}")
    print(f"\nwall time {sum(result.seconds.values()):.0f}s; outputs in {out}")


if __name__ == "__main__":
    main()
