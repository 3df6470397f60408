"""Regenerate the bundled demo load file ``src/dipps/data/demo_load.csv``.

Writes one day of minute readings in the household power consumption layout.
Each hour's readings average exactly to the designed hourly profile: the
minute noise comes in +/- pairs, and the few ``?`` gaps also remove whole
pairs.
"""

from __future__ import annotations

import argparse
import datetime as dt
from pathlib import Path

import numpy as np

HOURLY_KW = (
    0.50, 0.40, 0.40, 0.40, 0.40, 0.50, 0.80, 1.20, 1.00, 0.70, 0.60, 0.60,
    0.70, 0.60, 0.60, 0.60, 0.70, 0.35, 1.50, 1.80, 1.60, 1.20, 0.90, 0.60,
)  # fmt: skip
DAY = dt.date(2007, 1, 15)
GAP_HOURS = (3, 11, 20)  # hours holding one dropped +/- pair each
HEADER = "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3"


def build(seed: int = 7) -> str:
    rng = np.random.default_rng(seed)
    lines = [HEADER]
    for h, kw in enumerate(HOURLY_KW):
        half = np.round(rng.uniform(0.0, 0.3 * kw, 30), 3)
        noise = np.empty(60)
        noise[0::2] = half
        noise[1::2] = -half
        gap = {20, 21} if h in GAP_HOURS else set()
        for m in range(60):
            date = DAY.strftime("%d/%m/%Y")
            clock = f"{h:02d}:{m:02d}:00"
            if m in gap:
                lines.append(f"{date};{clock};?;?;?;?;?;?;")
                continue
            p = kw + noise[m]
            volts = 240.0 + rng.uniform(-3, 3)
            amps = p * 1000.0 / volts
            lines.append(f"{date};{clock};{p:.3f};{0.1 * p:.3f};{volts:.2f};{amps:.1f};0.000;1.000;{int(p > 1.0) * 17:.3f}")
    return "\n".join(lines) + "\n"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/dipps/data/demo_load.csv"))
    args = ap.parse_args()
    Path(args.out).write_text(build())


if __name__ == "__main__":
    main()
