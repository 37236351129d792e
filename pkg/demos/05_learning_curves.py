"""Metrics files and self-rendered SVG learning curves.

Every run writes a fixed-schema metrics.csv (one row per window) and a
per-episode log. The plotting module turns any set of metrics files into a
single SVG with no plotting library involved: same inputs, same bytes.
"""

import tempfile
from pathlib import Path

from igasil.config import resolve
from igasil.plotting import plot_to_file, read_metrics_csv
from igasil.trainer import METRICS_COLUMNS, run_campaign

SMALL = {
    "episodes": 1200, "train.warmup": 300, "train.window": 100,
    "buffers.scer_capacity": 16, "gasil.lambda_max": 2.0,
    "agent.actor_lr": 3e-3, "agent.entropy_coef": 0.05,
}

with tempfile.TemporaryDirectory() as tmp:
    csvs = []
    for variant in ("igasil", "iac"):
        cfg = resolve(overrides={**SMALL, "variant": variant, "out": tmp})
        run_dir = run_campaign(cfg)
        csvs.append(run_dir / "metrics.csv")
        print(f"{variant}: wrote {run_dir.name}/metrics.csv")

    print(f"\nschema: {METRICS_COLUMNS}")
    xs, ys = read_metrics_csv(csvs[0], "mean_return")
    print(f"igasil windowed means: {[round(y, 2) for y in ys]}")

    out = Path(tmp) / "comparison.svg"
    plot_to_file(csvs, out)
    text = out.read_text()
    print(f"\nwrote {out.name}: {len(text)} bytes, "
          f"{text.count('<polyline')} curves, legend from run names")

    stored = Path(tmp) / "stored_returns.svg"
    plot_to_file(csvs[:1], stored, column="scer_max",
                 title="best stored self-demonstration return")
    print(f"wrote {stored.name} (any metrics column can be plotted)")
