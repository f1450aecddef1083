"""Loopback distributed training demo: one master, three workers.

Splits a synthetic dense dataset into three parts, trains the same
linear model single-node and over the socket protocol (three worker
threads on loopback), and prints the comparison table.

Usage: python3 scripts/run_distributed_demo.py [--algo logistic] [--rounds 10]
"""

import argparse
import sys
import tempfile
import threading
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from deskbench import dataio, distbench, linmodels


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--algo", default="logistic", choices=["logistic", "svm"])
    parser.add_argument("--rows", type=int, default=6000)
    parser.add_argument("--features", type=int, default=100)
    parser.add_argument("--rounds", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--outdir", default="distributed-demo-out")
    args = parser.parse_args()

    pool = dataio.generate_synthetic(int(args.rows * 1.25), args.features, 4.0,
                                     args.seed)
    train = pool.take(range(args.rows))
    holdout = pool.take(range(args.rows, pool.num_rows))
    parts, _manifest = dataio.split_parts(train, 3, shuffle_seed=args.seed)
    print(f"train {train.num_rows} rows -> parts {[p.num_rows for p in parts]}, "
          f"holdout {holdout.num_rows}")

    cfg = linmodels.SgdConfig(lambda_=1e-4, epochs_or_iters=1,
                              learning_rate=0.1, seed=args.seed)
    _model, local = distbench.run_local_bench(
        train, args.algo, cfg, args.rounds, holdout, manifest="demo")
    print(f"local: wall {local.wall_clock_s:.2f}s auc {local.auc_roc:.4f}")

    with tempfile.TemporaryDirectory() as tmp:
        part_paths = []
        for i, part in enumerate(parts):
            path = Path(tmp) / f"part{i}.csv"
            dataio.save_dense(part, path)
            part_paths.append(path)

        spec = distbench.ClusterSpec(
            master_address="127.0.0.1:0",
            workers=[(i + 1, 1, str(part_paths[i])) for i in range(3)],
            round_timeout_s=30.0,
            max_rounds=args.rounds,
        )
        bound = {}
        ready = threading.Event()

        def on_listening(addr):
            bound["addr"] = f"{addr[0]}:{addr[1]}"
            ready.set()

        result = {}

        def master():
            result["run"] = distbench.run_master(
                spec, args.algo, cfg, args.rounds, holdout, "demo", on_listening)

        master_thread = threading.Thread(target=master)
        master_thread.start()
        ready.wait(timeout=10)
        workers = [
            threading.Thread(target=distbench.run_worker,
                             args=(bound["addr"], str(part_paths[i]), i + 1))
            for i in range(3)
        ]
        for t in workers:
            t.start()
        master_thread.join(timeout=120)
        for t in workers:
            t.join(timeout=10)

    _dist_model, record = result["run"]
    print(f"distributed: wall {record.wall_clock_s:.2f}s "
          f"auc {record.holdout_auc:.4f} "
          f"({record.bytes_sent}B out, {record.bytes_received}B in)")

    rows = distbench.bench_compare(local, record)
    csv_text = distbench.render_comparison_csv(rows)
    print()
    print(csv_text)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "comparison.csv").write_text(csv_text)
    print(f"wrote {outdir / 'comparison.csv'}")


if __name__ == "__main__":
    main()
