import numpy as np
import pandas as pd

from lvspill.synthetic import CORE_ASSETS, OTHER_ASSETS, DEFAULT_DAYS, bundled_dir, generate


def test_deterministic():
    a = generate(50, seed=3, assets=["BTC", "ADA"])
    b = generate(50, seed=3, assets=["BTC", "ADA"])
    for k in a:
        pd.testing.assert_frame_equal(a[k], b[k])


def test_schema_and_ranges():
    out = generate(80, seed=1)
    assert set(out) == set(CORE_ASSETS + OTHER_ASSETS)
    for f in out.values():
        assert list(f.columns) == ["date", "open", "high", "low", "close", "volume", "market_cap"]
        assert (f["high"] >= f[["open", "close"]].max(axis=1)).all()
        assert (f["low"] <= f[["open", "close"]].min(axis=1)).all()
        assert (f[["volume", "market_cap"]] > 0).all().all()


def test_bundled_files_match_generator():
    files = sorted(p.stem for p in bundled_dir().glob("*.csv"))
    assert files == sorted(CORE_ASSETS + OTHER_ASSETS)
    btc = pd.read_csv(bundled_dir() / "BTC.csv")
    assert len(btc) == DEFAULT_DAYS
    ref = generate()["BTC"]
    np.testing.assert_allclose(btc["close"], ref["close"], rtol=1e-9)
