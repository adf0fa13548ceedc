"""The whole pipeline through the command line interface.

Equivalent to running these commands by hand:

    danae synth    --out-dir demos/out/run --duration 30 --seed 5
    danae kf       --imu demos/out/run/imu.csv --out demos/out/run/kf.csv
    danae train    --kf ... --gt ... --angle roll --epochs 15 --out ...
    danae denoise  --model ... --kf ... --out ...
    danae eval     --kf ... --danae ... --gt ... --report ...

but chained with the temporal split handled for you. Inspect the written
report.txt / plot_data.csv afterwards; every run also leaves a
manifest.json recording the resolved configuration.

Run:  python3 demos/03_full_pipeline.py
"""

import sys
from pathlib import Path

from danae.cli import main as danae_cli

OUT = Path(__file__).parent / "out" / "pipeline"


def main() -> int:
    code = danae_cli([
        "pipeline",
        "--out-dir", str(OUT),
        "--duration", "30",
        "--seed", "5",
        "--angles", "roll,pitch",
        "--epochs", "15",
        "--stride", "10",
    ])
    if code == 0:
        print(f"\nartifacts in {OUT}:")
        for path in sorted(OUT.iterdir()):
            print(f"  {path.name}")
    return code


if __name__ == "__main__":
    sys.exit(main())
