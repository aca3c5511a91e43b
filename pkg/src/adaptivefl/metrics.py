"""Text artifacts of a run: a per-round CSV and a JSON-lines round log."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .federation import RoundRecord

CSV_COLUMNS = ("round", "acc_full", "acc_L1", "acc_M1", "acc_S1", "acc_avg", "waste_rate")


def metrics_rows(records: Sequence[RoundRecord]) -> list[dict]:
    return [
        {
            "round": r.round,
            "acc_full": r.acc_full,
            "acc_L1": r.acc_L1,
            "acc_M1": r.acc_M1,
            "acc_S1": r.acc_S1,
            "acc_avg": r.acc_avg,
            "waste_rate": r.waste_rate,
        }
        for r in records
    ]


def emit_metrics(records: Sequence[RoundRecord], out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``metrics.csv`` and ``rounds.jsonl`` into ``out_dir``; return both paths."""
    if not records:
        raise ValueError("no round records to write")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "metrics.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in metrics_rows(records):
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        log_path = out / "rounds.jsonl"
        with log_path.open("w") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metrics to {out}: {exc}") from exc
    return csv_path, log_path


def read_metrics(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [
            {k: (int(v) if k == "round" else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
