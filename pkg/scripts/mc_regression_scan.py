"""Scan candidate Monte Carlo regression configurations.

For each candidate prints the analytic value, the leading-order monitoring
bias, a pilot standard error scaled to 1e5 paths, and the projected runtime.
Configurations whose |bias| stays well inside one standard error are the ones
worth freezing into the regression suite.
"""
import argparse
import itertools
import time

import numpy as np

from drawdown_dividends.drawdown import AffineDrawdown
from drawdown_dividends.models import TransformModel
from drawdown_dividends.simulate import SimConfig, predicted_bias, simulate_survival_factor, simulate_value
from drawdown_dividends.valuation import survival_factor, value


def candidates():
    models = {
        "bm(1,1,1)": TransformModel.bm(1.0, 1.0, 1.0),
        "bm(0.5,0.5,1)": TransformModel.bm(0.5, 0.5, 1.0),
        "bm(0,1,2)": TransformModel.bm(0.0, 1.0, 2.0),
        "gbm(1,1,0.5,1)": TransformModel.gbm(1.0, 1.0, 0.5, 1.0),
        "gbm(1,1,0.3,1)": TransformModel.gbm(1.0, 1.0, 0.3, 1.0),
    }
    for (name, tm), xi, d0, (b, x0) in itertools.product(
        models.items(), [0.0, 0.5, 1.0], [0.25, 0.5, 1.0], [(0.5, 0.25), (1.0, 0.5), (1.0, 0.0)]
    ):
        yield name, tm, xi, d0, b, x0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pilot", type=int, default=4000)
    args = ap.parse_args()
    print("model xi d0 b x0 | V biasV/se tV | S biasS/se tS")
    for name, tm, xi, d0, b, x0 in candidates():
        dd = AffineDrawdown(xi, d0).to_drawdown(0.0)
        cfg = SimConfig(tm, dd, b=b, x0=x0, n_paths=args.pilot, seed=1)
        if not dd.eval_d(x0) > 0:
            continue
        try:
            v = value(tm, dd, x0, b).value
            s = survival_factor(tm, dd, x0, b)
        except Exception as exc:  # noqa: BLE001
            print(name, xi, d0, b, x0, "skip", exc)
            continue
        t0 = time.perf_counter()
        rv = simulate_value(cfg)
        tv = (time.perf_counter() - t0) * 1e5 / args.pilot
        t0 = time.perf_counter()
        rs = simulate_survival_factor(cfg)
        ts = (time.perf_counter() - t0) * 1e5 / args.pilot
        scale = np.sqrt(args.pilot / 1e5)
        bv = predicted_bias(cfg, "value") / (rv.std_err * scale)
        bs = predicted_bias(cfg, "survival") / (rs.std_err * scale)
        print(f"{name} {xi} {d0} {b} {x0} | {v:.4f} {bv:+.2f} {tv:.1f}s | {s:.4f} {bs:+.2f} {ts:.1f}s")


if __name__ == "__main__":
    main()
