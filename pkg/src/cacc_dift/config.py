"""INI run-configuration parsing.

Example::

    [platoon]
    n_followers = 9
    T = 0.1
    L = 5
    v0 = 25
    scheme = DIFT
    seed = 0
    duration = 240          ; or "trajectory"
    trajectory = synthetic:oscillating   ; or a path to a t,v / t,a CSV
    plant_integrator = zoh
    rate = implicit
    ; u_min = -5
    ; u_max = 3
    ; noise_sigma = 0.0
    ; max_omega_h = 3.0

    [gains]
    CACC1 = 0.8, 1
    CACC2 = 0.8, 1
    CACC3 = 0.9, 1
    ACC = 1.45, 1

    [comm]
    mode = distance_logistic
    p_max = 0.95
    d_half = 150
    steepness = 0.05

    [compare]
    n_seeds = 20

    [stability]
    modes = CACC1, CACC2, CACC3, ACC
    omega_k = 0.8, 1.45         ; grid, crossed with h_d; omit to use the gains table
    h_d = 1
    w_min = 1e-3
    w_max = 1e3
    n_points = 4000
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .comm import LINK_MODES, LinkModel
from .control import DEFAULT_GAINS, ConfigError, Mode, make_gains
from .sim import LeaderTrajectory, PlatoonConfig, load_leader_trajectory, synthetic_leader
from .stability import FrequencyGrid

SYNTHETIC_PREFIX = "synthetic:"


@dataclass
class StabilitySpec:
    modes: list[Mode] = field(default_factory=lambda: list(Mode))
    omega_k: list[float] | None = None
    h_d: list[float] | None = None
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)


@dataclass
class RunFile:
    platoon: PlatoonConfig
    trajectory: str = SYNTHETIC_PREFIX + "oscillating"
    n_seeds: int = 20
    stability: StabilitySpec = field(default_factory=StabilitySpec)
    base_dir: Path = Path(".")

    def leader(self) -> LeaderTrajectory:
        cfg = self.platoon
        if self.trajectory.startswith(SYNTHETIC_PREFIX):
            kind = self.trajectory[len(SYNTHETIC_PREFIX):]
            duration = cfg.duration if cfg.duration is not None else 240.0
            return synthetic_leader(kind, cfg.T, duration, cfg.v0)
        path = Path(self.trajectory)
        if not path.is_absolute():
            path = self.base_dir / path
        return load_leader_trajectory(path, cfg.T, cfg.v0)


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what}: {text!r}") from None


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except (ValueError, KeyError):
        raise ConfigError(f"[{section.name}] {key}: cannot parse {raw!r}") from None


def _optional_float(raw: str) -> float | None:
    return None if raw.lower() in ("", "none", "off") else float(raw)


def parse_config(text: str, base_dir: Path | str = ".") -> RunFile:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep gain row names as written
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from None
    sec = {name: parser[name] if parser.has_section(name) else None
           for name in ("platoon", "gains", "comm", "compare", "stability")}
    known = set(sec)
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown config section [{name}]")

    gains = dict(DEFAULT_GAINS)
    if sec["gains"] is not None:
        for key, raw in sec["gains"].items():
            try:
                mode = Mode[key.strip().upper()]
            except KeyError:
                raise ConfigError(f"[gains] unknown mode {key!r}") from None
            vals = _floats(raw, f"[gains] {key}")
            if len(vals) != 2:
                raise ConfigError(f"[gains] {key}: expected 'omega_k, h_d', got {raw!r}")
            gains[mode] = make_gains(mode, *vals)

    c = sec["comm"]
    mode = _get(c, "mode", str, "distance_logistic")
    if mode not in LINK_MODES:
        raise ConfigError(f"[comm] mode must be one of {LINK_MODES}, got {mode!r}")
    try:
        link = LinkModel(
            p_max=_get(c, "p_max", float, 0.95),
            d_half=_get(c, "d_half", float, 150.0),
            steepness=_get(c, "steepness", float, 0.05),
            mode=mode,
        )
    except ValueError as exc:
        raise ConfigError(f"[comm] {exc}") from None

    p = sec["platoon"]
    duration_raw = _get(p, "duration", str, "trajectory")
    duration = None if duration_raw.lower() == "trajectory" else _get(p, "duration", float, None)
    cfg = PlatoonConfig(
        n_followers=_get(p, "n_followers", int, 9),
        T=_get(p, "T", float, 0.1),
        L=_get(p, "L", float, 5.0),
        v0=_get(p, "v0", float, 25.0),
        gains_table=gains,
        scheme=_get(p, "scheme", lambda s: s.upper(), "DIFT"),
        link_model=link,
        seed=_get(p, "seed", int, 0),
        duration=duration,
        plant_integrator=_get(p, "plant_integrator", str.lower, "zoh"),
        rate=_get(p, "rate", str.lower, "implicit"),
        u_min=_get(p, "u_min", _optional_float, None),
        u_max=_get(p, "u_max", _optional_float, None),
        noise_sigma=_get(p, "noise_sigma", float, 0.0),
        max_omega_h=_get(p, "max_omega_h", _optional_float, None),
    )

    s = sec["stability"]
    stab = StabilitySpec()
    if s is not None:
        if "modes" in s:
            try:
                stab.modes = [Mode[m.strip().upper()] for m in s["modes"].split(",") if m.strip()]
            except KeyError as exc:
                raise ConfigError(f"[stability] unknown mode {exc}") from None
        if "omega_k" in s:
            stab.omega_k = _floats(s["omega_k"], "[stability] omega_k")
        if "h_d" in s:
            stab.h_d = _floats(s["h_d"], "[stability] h_d")
        for vals, name in ((stab.omega_k, "omega_k"), (stab.h_d, "h_d")):
            if vals is not None and (not vals or any(v <= 0 for v in vals)):
                raise ConfigError(f"[stability] {name} grid must hold positive values")
        try:
            stab.grid = FrequencyGrid(
                _get(s, "w_min", float, 1e-3), _get(s, "w_max", float, 1e3), _get(s, "n_points", int, 4000)
            )
        except ValueError as exc:
            raise ConfigError(f"[stability] {exc}") from None

    return RunFile(
        platoon=cfg,
        trajectory=_get(p, "trajectory", str, SYNTHETIC_PREFIX + "oscillating"),
        n_seeds=_get(sec["compare"], "n_seeds", int, 20),
        stability=stab,
        base_dir=Path(base_dir),
    )


def load_config(path) -> RunFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, base_dir=path.parent)
