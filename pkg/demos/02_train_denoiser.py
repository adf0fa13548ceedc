"""Train the window denoiser on one angle and watch the loss fall.

Uses a short scenario and a reduced number of epochs so it finishes in
about a minute; the full benchmark settings live in the acceptance suite
and in `danae pipeline`.

Run:  python3 demos/02_train_denoiser.py
"""

import time
from pathlib import Path

from danae import (
    FractionSplit,
    SynthConfig,
    TrainConfig,
    build_model,
    denoise_series,
    deviations,
    make_windows,
    run_kf,
    save_model,
    split,
    synth_trajectory,
    train,
)

OUT = Path(__file__).parent / "out"


def main() -> None:
    cfg = SynthConfig(duration=40.0, seed=7)
    imu, gt = synth_trajectory(cfg)
    kf = run_kf(imu)

    kf_train, kf_test = split(kf, FractionSplit(0.8))
    gt_train, gt_test = split(gt, FractionSplit(0.8))
    windows = make_windows(kf_train, gt_train, "roll", stride=10)
    print(f"{len(windows)} training windows of length {windows.window_length}")

    model = build_model(seed=7)
    started = time.perf_counter()
    history = train(model, windows, TrainConfig(epochs=20, seed=7))
    for epoch in range(0, len(history), 5):
        print(f"  epoch {epoch + 1:3d}: mean loss {history[epoch]:.5f}")
    print(f"  epoch {len(history):3d}: mean loss {history[-1]:.5f}")
    print(f"trained in {time.perf_counter() - started:.0f}s")

    denoised = denoise_series(model, kf_test, "roll")
    kf_rmse = deviations(kf_test, gt_test, "roll").rmse
    dn_rmse = deviations(denoised, gt_test, "roll").rmse
    print(f"\nheld-out roll RMSE: filter {kf_rmse:.4f} rad -> "
          f"denoised {dn_rmse:.4f} rad ({100 * (1 - dn_rmse / kf_rmse):.0f}% lower)")

    OUT.mkdir(exist_ok=True)
    save_model(OUT / "roll_denoiser.ckpt", model, angle_id="roll")
    print(f"checkpoint written to {OUT / 'roll_denoiser.ckpt'}")


if __name__ == "__main__":
    main()
