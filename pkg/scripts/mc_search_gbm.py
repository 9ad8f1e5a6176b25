"""Randomized search for low-bias GBM regression points (see mc_select_configs.py).

Samples the draw-down anchor a, d0 and the barrier b, root-finds the start
point where the first-order monitoring bias vanishes, and keeps points whose
cancelling parts are small relative to the standard error.
"""
import argparse
import time

import numpy as np

from drawdown_dividends.drawdown import AffineDrawdown
from drawdown_dividends.simulate import SimConfig, bias_components, simulate_survival_factor, simulate_value
from mc_select_configs import FAMILIES, MODELS, N, survival_se, zero_bias_start


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--family", choices=sorted(FAMILIES), required=True)
    ap.add_argument("--kind", choices=["value", "survival"], required=True)
    ap.add_argument("--draws", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    tm = MODELS["gbm(0.5,1,2,1)"]
    xi = FAMILIES[args.family]
    rng = np.random.default_rng(args.seed)
    lo = tm.transform.lower
    for _ in range(args.draws):
        a = float(np.round(rng.uniform(lo + 0.3, 0.0), 2))
        d0 = float(np.round(rng.uniform(0.2, 2.0), 2))
        aff = AffineDrawdown(xi, d0)
        dd = aff.to_drawdown(a)
        if dd.d_a <= 0 or not dd.eval_dhat(a) > lo + 0.05:
            continue
        b = float(np.round(a + rng.uniform(0.3, 3.0), 2))
        cfg = SimConfig(tm, dd, b=b, x0=a, n_paths=2000, seed=1)
        try:
            roots = zero_bias_start(cfg, args.kind, a, b * (1 - 1e-9) if b > 0 else b - 1e-9, n=16)
        except Exception as exc:  # noqa: BLE001
            print("skip", a, d0, b, exc)
            continue
        for x in roots:
            _, pb, pk = bias_components(cfg, args.kind, x)
            c = SimConfig(tm, dd, b=b, x0=x, n_paths=2000, seed=1)
            t0 = time.perf_counter()
            r = simulate_value(c) if args.kind == "value" else simulate_survival_factor(c)
            rt = (time.perf_counter() - t0) * N / 2000
            se = r.std_err * np.sqrt(2000 / N) if args.kind == "value" else survival_se(tm, dd, x, b)
            print(f"a={a} d0={d0} b={b} x={x:.6f} parts/se=({pb / se:+.2f},{pk / se:+.2f}) runtime~{rt:.0f}s",
                  flush=True)


if __name__ == "__main__":
    main()
