"""Compare the compiled split kernel against the pure NumPy fallback.

Trains the same boosting configuration on the same synthetic matrix under
each available backend, reports wall time and rounds/second, and verifies
the resulting models serialize to byte-identical documents (the backends
must agree bitwise, not approximately).

Run:  python3 benchmarks/bench_backends.py [--rows N] [--rounds R]
"""

from __future__ import annotations

import argparse
import time

from aircal import model_io
from aircal._kernels import available_backends, backend_name, set_backend
from aircal.gbdt import Hyperparams, train
from aircal.ingest import group_by_sensor, parse_csv, table_to_csv, to_records
from aircal.preprocess import (
    FillStrategy,
    SplitMode,
    TargetMode,
    build_features,
    impute_records,
    make_split,
    truncate_to_min,
)
from aircal.synth import SynthConfig, generate, records_to_table


def build_matrix(rows: int, seed: int):
    n_sensors = 20
    n_timesteps = max(2, rows // n_sensors)
    config = SynthConfig(n_sensors=n_sensors, n_timesteps=n_timesteps, seed=seed)
    table = records_to_table(generate(config))
    records = to_records(parse_csv(table_to_csv(table)))
    per_sensor = impute_records(
        group_by_sensor(records), FillStrategy.FORWARD_BACKWARD
    )
    matrix, _ = build_features(truncate_to_min(per_sensor), TargetMode.OFFSET)
    return matrix


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=40000)
    parser.add_argument("--rounds", type=int, default=60)
    parser.add_argument("--depth", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    matrix = build_matrix(args.rows, args.seed)
    split = make_split(matrix.n_rows, SplitMode.CHRONOLOGICAL)
    params = Hyperparams(
        eta=0.16, n_rounds=args.rounds, max_depth=args.depth, seed=args.seed
    )
    print(
        f"matrix: {matrix.n_rows} rows x {len(matrix.feature_names)} features; "
        f"{args.rounds} rounds at depth {args.depth}"
    )

    documents = {}
    timings = {}
    original = backend_name()
    try:
        for name in available_backends():
            set_backend(name)
            start = time.perf_counter()
            model, report = train(matrix, split, params)
            elapsed = time.perf_counter() - start
            timings[name] = elapsed
            documents[name] = model_io.save(model, report)
            print(
                f"  {name:>8}: {elapsed:8.3f} s "
                f"({args.rounds / elapsed:7.1f} rounds/s)"
            )
    finally:
        set_backend(original)

    texts = set(documents.values())
    if len(texts) == 1:
        print("model documents: byte-identical across backends")
    else:
        print("model documents: MISMATCH across backends")
        return 1
    if len(timings) == 2:
        fast, slow = min(timings.values()), max(timings.values())
        print(f"speedup: {slow / fast:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
