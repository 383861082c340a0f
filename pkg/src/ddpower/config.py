"""Scenario files.

INI-style text, one ``[scenario]`` section and one ``[sensor.<i>]`` section per
sensor (``i = 1..k``)::

    [scenario]
    k = 2
    n = 2
    sigma2_dbm = -70
    p_tot_dbm = 0
    pl0_db = 55          ; pathloss keys are required when any sensor uses d_m
    pathloss_exp = 2
    d0_m = 1
    p_max_dbm = 3.0103   ; optional default for every sensor
    rho = 0.2            ; optional, two-sensor interfering channel
    gain_convention = amplitude   ; with rho: amplitude (as printed) | power
    h = 1 0.2; 0.2 1     ; optional explicit N x K channel (rows split by ';')
    prior0 = 0.5         ; optional, used by ``bounds``

    [sensor.1]
    d_m = 2              ; or gain_db = -61.02
    p_d = 0.1
    p_f = 0.04
    p_max_dbm = 3.0103

Without ``rho`` or ``h`` the channel is orthogonal with ``H = diag(sqrt(g))``
and ``R = sigma2 I``. Unknown keys and sections are rejected.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import (
    ChannelSpec,
    Scenario,
    ScenarioError,
    SensorProfile,
    build_cross_channel,
    build_orthogonal_channel,
    db_to_linear,
    dbm_to_mw,
    pathloss_gain,
)

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config"]

GLOBAL_KEYS = {
    "k", "n", "sigma2_dbm", "p_tot_dbm", "pl0_db", "pathloss_exp", "d0_m",
    "p_max_dbm", "rho", "gain_convention", "h", "prior0", "prior1",
}
SENSOR_KEYS = {"d_m", "gain_db", "p_d", "p_f", "p_max_dbm"}
_SENSOR_RE = re.compile(r"^sensor\.(\d+)$")


class ConfigError(ScenarioError):
    def __init__(self, message: str, section: str | None = None, key: str | None = None, line: int | None = None):
        self.section, self.key, self.line = section, key, line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    prior0: float = 0.5
    prior1: float = 0.5
    source: str | None = None


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    idx = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            idx[(section, None)] = no
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            idx.setdefault((section, m.group(1).strip().lower()), no)
    return idx


def parse_config(text: str, source: str | None = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=source or "<string>")
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    lines = _line_index(text)

    def err(msg, section=None, key=None):
        return ConfigError(msg, section, key, lines.get((section, key), lines.get((section, None))))

    def num(section, key, cast=float):
        raw = cp.get(section, key)
        try:
            return cast(raw)
        except ValueError:
            raise err(f"cannot parse {raw!r} as {cast.__name__}", section, key) from None

    sections = cp.sections()
    if "scenario" not in sections:
        raise ConfigError("missing [scenario] section")
    sensor_sections = {}
    for sec in sections:
        if sec == "scenario":
            continue
        m = _SENSOR_RE.match(sec)
        if not m:
            raise err(f"unknown section [{sec}]", sec)
        sensor_sections[int(m.group(1))] = sec
    for key in cp.options("scenario"):
        if key not in GLOBAL_KEYS:
            raise err(f"unknown key {key!r}", "scenario", key)

    for key in ("k", "sigma2_dbm", "p_tot_dbm"):
        if not cp.has_option("scenario", key):
            raise err(f"missing required key {key!r}", "scenario")
    k = num("scenario", "k", int)
    if k < 1:
        raise err("k must be at least 1", "scenario", "k")
    if sorted(sensor_sections) != list(range(1, k + 1)):
        raise err(f"expected sections [sensor.1] .. [sensor.{k}], found {sorted(sensor_sections)}", "scenario", "k")
    n = num("scenario", "n", int) if cp.has_option("scenario", "n") else None
    sigma2 = dbm_to_mw(num("scenario", "sigma2_dbm"))
    p_tot = dbm_to_mw(num("scenario", "p_tot_dbm"))
    default_pmax = num("scenario", "p_max_dbm") if cp.has_option("scenario", "p_max_dbm") else None

    sensors, gains = [], []
    for i in range(1, k + 1):
        sec = sensor_sections[i]
        for key in cp.options(sec):
            if key not in SENSOR_KEYS:
                raise err(f"unknown key {key!r}", sec, key)
        for key in ("p_d", "p_f"):
            if not cp.has_option(sec, key):
                raise err(f"missing required key {key!r}", sec)
        if cp.has_option(sec, "p_max_dbm"):
            pmax_dbm = num(sec, "p_max_dbm")
        elif default_pmax is not None:
            pmax_dbm = default_pmax
        else:
            raise err("missing p_max_dbm (and no [scenario] default)", sec)
        try:
            sensors.append(SensorProfile(num(sec, "p_d"), num(sec, "p_f"), dbm_to_mw(pmax_dbm)))
        except ScenarioError as exc:
            raise err(f"{type(exc).__name__}: {exc}", sec, "p_d") from None

        has_d, has_g = cp.has_option(sec, "d_m"), cp.has_option(sec, "gain_db")
        if has_d and has_g:
            raise err("give either d_m or gain_db, not both", sec, "gain_db")
        if has_d:
            for key in ("pl0_db", "pathloss_exp", "d0_m"):
                if not cp.has_option("scenario", key):
                    raise err(f"d_m needs [scenario] {key}", sec, "d_m")
            try:
                pl = pathloss_gain(
                    num(sec, "d_m"), num("scenario", "pl0_db"),
                    num("scenario", "pathloss_exp"), num("scenario", "d0_m"),
                )
            except ValueError as exc:
                raise err(str(exc), sec, "d_m") from None
            gains.append(pl.gain)
        elif has_g:
            gains.append(db_to_linear(num(sec, "gain_db")))
        else:
            gains.append(None)

    has_rho = cp.has_option("scenario", "rho")
    has_h = cp.has_option("scenario", "h")
    if cp.has_option("scenario", "gain_convention") and not has_rho:
        raise err("gain_convention only applies with rho", "scenario", "gain_convention")
    try:
        if has_h:
            if has_rho:
                raise err("give either rho or h, not both", "scenario", "h")
            rows = [r for r in cp.get("scenario", "h").split(";") if r.strip()]
            try:
                h = np.array([[float(v) for v in re.split(r"[\s,]+", r.strip())] for r in rows])
            except ValueError:
                raise err("h must be numeric rows separated by ';'", "scenario", "h") from None
            if h.ndim != 2 or h.shape[1] != k:
                raise err(f"h must have {k} columns", "scenario", "h")
            channel = ChannelSpec(h=h, r=sigma2 * np.eye(h.shape[0]), kind="general")
        else:
            missing = [i + 1 for i, g in enumerate(gains) if g is None]
            if missing:
                raise err("sensor needs d_m or gain_db", f"sensor.{missing[0]}")
            if has_rho:
                if k != 2:
                    raise err("rho requires exactly two sensors", "scenario", "rho")
                conv = cp.get("scenario", "gain_convention", fallback="amplitude").strip()
                channel = build_cross_channel(gains, num("scenario", "rho"), sigma2, conv)
            else:
                channel = build_orthogonal_channel(gains, sigma2)
        if n is not None and n != channel.n_rx:
            raise err(f"n={n} but the channel has {channel.n_rx} receive dimensions", "scenario", "n")
        scenario = Scenario(tuple(sensors), channel, p_tot)
    except ConfigError:
        raise
    except ScenarioError as exc:
        raise err(f"{type(exc).__name__}: {exc}", "scenario") from None

    prior0 = num("scenario", "prior0") if cp.has_option("scenario", "prior0") else None
    prior1 = num("scenario", "prior1") if cp.has_option("scenario", "prior1") else None
    if prior0 is None and prior1 is None:
        prior0 = prior1 = 0.5
    elif prior1 is None:
        prior1 = 1.0 - prior0
    elif prior0 is None:
        prior0 = 1.0 - prior1
    if prior0 < 0 or prior1 < 0 or abs(prior0 + prior1 - 1.0) > 1e-12:
        raise err("priors must be nonnegative and sum to 1", "scenario", "prior0")
    return ScenarioConfig(scenario, prior0, prior1, source)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
