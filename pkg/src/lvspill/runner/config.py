"""Run configuration: a JSON document of nested sections with a fixed key schema.

Unknown keys anywhere are rejected. ``RunConfig.to_dict()`` round-trips
through :func:`load_config`, and the serialized form is what a run writes
to ``config.json``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError


@dataclass
class DataConfig:
    # empty data_dir means the bundled synthetic dataset
    data_dir: str = ""
    assets: list = field(default_factory=list)
    align: str = "inner"


@dataclass
class CoreConfig:
    N: int = 7
    whitelist: list = field(default_factory=lambda: ["BTC", "ETH", "BNB"])
    lags: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    alpha: float = 0.05
    damping: float = 0.85
    tol: float = 1e-10


@dataclass
class FeatureConfig:
    turnover_fallback_window: int = 252


@dataclass
class FactorConfig:
    n_pc: int = 3
    # "all" = every asset in the universe, "core" = selected cores only
    pca_universe: str = "all"
    vol_group: str = "park_vol"
    rs_window: int = 252
    leave_out_k: list = field(default_factory=lambda: [1])
    H: int = 10
    # dispersion features of the risk index: "vol_pcs" or "var_block"
    risk_features: str = "vol_pcs"
    feat_window: int = 5
    shock_window: int = 5


@dataclass
class LayerSettings:
    lv_block: list = field(default_factory=lambda: ["amihud", "turnover", "garch_vol", "park_vol"])
    ret_targets: list = field(
        default_factory=lambda: ["amihud", "resid_turnover", "resid_garch_vol", "resid_park_vol"]
    )
    lv_groups: list = field(default_factory=lambda: ["amihud", "turnover", "garch_vol", "park_vol"])
    fixed_lags: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    pmax: int = 10
    alpha: float = 0.05


@dataclass
class VarConfig:
    horizons: int = 20
    pmax: int = 10
    ljung_box_lags: int = 10


@dataclass
class HarxConfig:
    windows: list = field(default_factory=lambda: [1, 5, 22])
    nw_lag: Any = "auto"
    targets: list = field(
        default_factory=lambda: ["mkt_xsec_vol_l2", "mkt_xsec_vol_l2_rs252", "market_rv14", "market_rv14_rs"]
    )


@dataclass
class MlConfig:
    fractions: list = field(default_factory=lambda: [0.7, 0.15, 0.15])
    quantile: float = 0.85
    # rows dropped at the end of train and valid; null means H
    embargo: Any = None
    max_depth: int = 3
    learning_rate: float = 0.05
    n_rounds: int = 2000
    early_stopping_rounds: int = 50
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    logistic_l2: float = 1.0


@dataclass
class RobustConfig:
    rs_windows: list = field(default_factory=lambda: [63, 126, 252])
    fixed_lags: list = field(default_factory=lambda: [1, 2, 3, 4, 5])


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    core: CoreConfig = field(default_factory=CoreConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    factors: FactorConfig = field(default_factory=FactorConfig)
    layers: LayerSettings = field(default_factory=LayerSettings)
    var: VarConfig = field(default_factory=VarConfig)
    harx: HarxConfig = field(default_factory=HarxConfig)
    ml: MlConfig = field(default_factory=MlConfig)
    robust: RobustConfig = field(default_factory=RobustConfig)
    seed: int = 0
    output_root: str = "output"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def validate(self) -> "RunConfig":
        c = self
        if c.data.align not in ("inner", "union"):
            raise ConfigError("data.align must be 'inner' or 'union'")
        if c.factors.pca_universe not in ("all", "core"):
            raise ConfigError("factors.pca_universe must be 'all' or 'core'")
        if c.factors.vol_group not in ("garch_vol", "park_vol"):
            raise ConfigError("factors.vol_group must be 'garch_vol' or 'park_vol'")
        if c.factors.risk_features not in ("vol_pcs", "var_block"):
            raise ConfigError("factors.risk_features must be 'vol_pcs' or 'var_block'")
        if c.factors.n_pc < 1:
            raise ConfigError("factors.n_pc must be >= 1")
        if any(k < 1 or k >= c.factors.n_pc for k in c.factors.leave_out_k):
            raise ConfigError("factors.leave_out_k entries must be in [1, n_pc)")
        if len(c.ml.fractions) != 3 or abs(sum(c.ml.fractions) - 1.0) > 1e-9:
            raise ConfigError("ml.fractions must be three shares summing to 1")
        if not 0 < c.ml.quantile < 1:
            raise ConfigError("ml.quantile must be in (0, 1)")
        if c.harx.nw_lag != "auto" and (not isinstance(c.harx.nw_lag, int) or c.harx.nw_lag < 0):
            raise ConfigError("harx.nw_lag must be 'auto' or a non-negative integer")
        if c.core.N < len(c.core.whitelist):
            raise ConfigError("core.N must be at least the whitelist size")
        return self


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config keys at {path or 'top level'}: {unknown}")
    kwargs = {}
    for name, value in data.items():
        sub = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)
