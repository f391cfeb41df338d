"""Application configuration: one JSON file, overridable from the environment.

Every field can be overridden with ``LOCALGEO_<FIELD>`` (upper case), e.g.
``LOCALGEO_MIN_K=5`` or ``LOCALGEO_GAZETTEER=/data/lt.tsv``.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields
from datetime import timedelta
from pathlib import Path
from typing import Any, Mapping

from localgeo.affinity import AffinityParams
from localgeo.errors import ValidationError
from localgeo.geocoder import GeocoderConfig

ENV_PREFIX = "LOCALGEO_"
_PATH_FIELDS = {"gazetteer", "geocoder_gazetteer", "cities", "affinity", "corpus", "dma", "strongly_local"}


@dataclass(frozen=True)
class AppConfig:
    trim_words: int = 10
    geohash_len: int = 4
    prefix_len: int = 2
    tau_geohash3: float = 0.2
    tau_admin: float = 0.2
    min_articles: int = 20
    time_window_days: float = 30.0
    min_k: int = 3
    feed_count: int = 10
    max_cover_cells: int = 4096

    geocoder: str = "offline"  # offline | remote
    qps_limit: float = 5.0
    geocoder_timeout: float = 5.0
    cache_capacity: int = 10_000
    geocoder_endpoint: str = ""
    geocoder_key: str = ""

    gazetteer: str = ""
    geocoder_gazetteer: str = ""  # offline geocoder data; defaults to the gazetteer
    alias_whitelist: tuple[str, ...] = ()
    cities: str = ""
    affinity: str = ""
    corpus: str = ""
    dma: str = ""
    strongly_local: str = ""  # newline-separated publisher ids

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in ("int", "float") and not v > 0:
                raise ValidationError(f"config {f.name} must be positive, got {v}")
        if self.geohash_len != 4:
            raise ValidationError("geohash_len is fixed at 4 for stamping and serving")
        if self.prefix_len > self.geohash_len:
            raise ValidationError("prefix_len must not exceed geohash_len")
        if self.geocoder not in ("offline", "remote"):
            raise ValidationError(f"unknown geocoder mode {self.geocoder!r}")
        if not (0 < self.tau_geohash3 < 1 and 0 < self.tau_admin < 1):
            raise ValidationError("gap-ratio thresholds must lie in (0, 1)")

    def affinity_params(self) -> AffinityParams:
        return AffinityParams(
            tau_geohash3=self.tau_geohash3,
            tau_admin=self.tau_admin,
            min_articles=self.min_articles,
            time_window=timedelta(days=self.time_window_days),
            geohash_len=self.geohash_len,
            max_cover_cells=self.max_cover_cells,
            trim_words=self.trim_words,
        )

    def geocoder_config(self) -> GeocoderConfig:
        return GeocoderConfig(
            endpoint=self.geocoder_endpoint,
            api_key=self.geocoder_key,
            qps_limit=self.qps_limit,
            timeout=self.geocoder_timeout,
            cache_capacity=self.cache_capacity,
        )

    def to_dict(self, redact: bool = True) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["alias_whitelist"] = list(self.alias_whitelist)
        if redact and d["geocoder_key"]:
            d["geocoder_key"] = "***"
        return d

    def describe(self) -> str:
        return "\n".join(f"{k} = {v!r}" for k, v in self.to_dict().items())


def _coerce(ftype: str, raw: Any, name: str) -> Any:
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype.startswith("tuple"):
            if isinstance(raw, str):
                return tuple(s.strip() for s in raw.split(",") if s.strip())
            return tuple(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config {name}: cannot parse {raw!r}") from exc


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    **overrides: Any,
) -> AppConfig:
    """File values, then environment, then keyword overrides.

    Relative paths in the file are resolved against the file's directory.
    """
    env = os.environ if env is None else env
    types = {f.name: f.type for f in fields(AppConfig)}
    values: dict[str, Any] = {}
    if path:
        base = Path(path).resolve().parent
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = sorted(set(data) - set(types))
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {unknown}")
        for name, raw in data.items():
            if name in _PATH_FIELDS and raw and not Path(raw).is_absolute():
                raw = str(base / raw)
            values[name] = raw
    for name in types:
        key = ENV_PREFIX + name.upper()
        if key in env:
            values[name] = env[key]
    for name, raw in overrides.items():
        if name not in types:
            raise ValidationError(f"unknown config key {name}")
        if raw is not None:
            values[name] = raw
    return AppConfig(**{name: _coerce(types[name], raw, name) for name, raw in values.items()})

