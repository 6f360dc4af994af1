"""Deterministic synthetic daily crypto-style panel used as the bundled dataset.

The generator plants the structure the pipeline looks for: a persistent
market volatility factor driven partly by lagged illiquidity shocks, lead-lag
return spillovers from a few sender assets, volume that rises with
volatility, and high/low ranges consistent with the daily volatility.

Regenerate the bundled files with::

    python -m lvspill.synthetic --out src/lvspill/data/synthetic
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

CORE_ASSETS = ("ETH", "BTC", "YFI", "DOT", "XEM", "BNB", "ARK")
OTHER_ASSETS = ("ADA", "XRP", "LTC", "LINK", "DOGE", "SOL")
SENDERS = {"BTC": 0.108, "ETH": 0.102, "BNB": 0.096, "YFI": 0.09, "DOT": 0.084, "XEM": 0.084, "ARK": 0.078}
# sender -> sender weight relative to sender -> receiver
SENDER_TO_SENDER = 0.8
DEFAULT_SEED = 20250808
DEFAULT_DAYS = 1100
START = "2021-01-01"


def bundled_dir() -> Path:
    return Path(__file__).resolve().parent / "data" / "synthetic"


def generate(n_days: int = DEFAULT_DAYS, seed: int = DEFAULT_SEED, assets=None) -> dict:
    """Return ``{asset: DataFrame}`` with the per-asset CSV schema."""
    assets = list(assets) if assets is not None else list(CORE_ASSETS + OTHER_ASSETS)
    rng = np.random.default_rng(seed)
    n = len(assets)
    burn = 300
    T = n_days + burn

    liq = np.zeros(T)
    h = np.zeros(T)
    liq_eps = rng.standard_normal(T)
    h_eps = rng.standard_normal(T)
    for t in range(1, T):
        liq[t] = 0.6 * liq[t - 1] + 0.5 * liq_eps[t]
        h[t] = 0.96 * h[t - 1] + 0.06 * liq[t - 1] + 0.12 * h_eps[t]

    base_vol = rng.uniform(0.025, 0.06, n)
    loading = rng.uniform(0.25, 0.5, n)
    beta = rng.uniform(0.6, 1.2, n)
    idio_h = np.zeros((T, n))
    idio_eps = rng.standard_normal((T, n))
    for t in range(1, T):
        idio_h[t] = 0.9 * idio_h[t - 1] + 0.06 * idio_eps[t]
    sigma = base_vol * np.exp(loading * h[:, None] + idio_h)

    mkt = 0.004 * np.exp(0.3 * h) * rng.standard_normal(T)
    z = rng.standard_normal((T, n))
    ret = np.zeros((T, n))
    sender_idx = {a: assets.index(a) for a in SENDERS if a in assets}
    # senders feed every other asset; links between senders are damped so the
    # aggregate spillover term stays weakly autocorrelated
    receivers = np.array([a not in SENDERS for a in assets])
    spread = {}
    for w in sender_idx.values():
        spread[w] = np.where(receivers, 1.0, SENDER_TO_SENDER)
        spread[w][w] = 0.0
    for t in range(T):
        ret[t] = beta * mkt[t] + sigma[t] * z[t] * 0.8
        if t:
            for a, w in sender_idx.items():
                ret[t] += SENDERS[a] * spread[w] * ret[t - 1, w]
        ret[t] = np.clip(ret[t], -0.45, 0.45)

    price0 = rng.uniform(0.5, 3000.0, n)
    log_close = np.log(price0) + np.cumsum(ret, axis=0)
    close = np.exp(log_close)
    open_ = np.vstack([close[:1], close[:-1]])
    rng_hi = np.abs(rng.standard_normal((T, n))) * sigma * 0.5
    rng_lo = np.abs(rng.standard_normal((T, n))) * sigma * 0.5
    high = np.maximum(open_, close) * np.exp(rng_hi)
    low = np.minimum(open_, close) * np.exp(-rng_lo)

    supply = rng.uniform(1e7, 1e10, n)
    cap = close * supply * np.exp(np.cumsum(rng.normal(0, 1e-4, (T, n)), axis=0))
    vol_noise = rng.standard_normal((T, n))
    # volume rises with volatility and falls with the illiquidity factor
    volume = cap * 0.03 * np.exp(0.9 * np.log(sigma / base_vol) - 0.15 * liq[:, None] + 0.35 * vol_noise)

    dates = pd.date_range(START, periods=n_days, freq="D").strftime("%Y-%m-%d")
    out = {}
    for i, a in enumerate(assets):
        sl = slice(burn, T)
        out[a] = pd.DataFrame(
            {
                "date": dates,
                "open": open_[sl, i],
                "high": high[sl, i],
                "low": low[sl, i],
                "close": close[sl, i],
                "volume": volume[sl, i],
                "market_cap": cap[sl, i],
            }
        )
    return out


def write(out_dir, n_days: int = DEFAULT_DAYS, seed: int = DEFAULT_SEED, assets=None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for asset, frame in generate(n_days, seed, assets).items():
        path = out_dir / f"{asset}.csv"
        frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        paths.append(path)
    return paths


def main(argv=None):
    ap = argparse.ArgumentParser(description="write the synthetic per-asset CSVs")
    ap.add_argument("--out", default=str(bundled_dir()))
    ap.add_argument("--days", type=int, default=DEFAULT_DAYS)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = ap.parse_args(argv)
    for p in write(args.out, args.days, args.seed):
        print(p)


if __name__ == "__main__":
    main()
