"""Run configuration: flat ``key = value`` text, validated and resolvable.

The format is line oriented: ``#`` starts a comment, blank lines are
ignored, keys are dotted (``measure.k = 1e5``).  Every run writes back
its fully resolved configuration, so parse(render(config)) == config and
any output can be reproduced from the file sitting next to it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .chaos import NOISE, OFFSET, BranchProtocol
from .classical import NoiseSpec, matched_noise
from .errors import ConfigError, QtlError
from .grid import Grid, make_grid
from .quantum import MeasureParams, SystemParams

MODES = ("quantum", "classical", "lyapunov", "strobe", "regime", "sweep")
#: modes whose output depends on random draws, hence need a seed
STOCHASTIC_MODES = ("quantum", "lyapunov", "strobe", "sweep")

_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def _parse_bool(text: str) -> bool:
    if text.lower() in _TRUE:
        return True
    if text.lower() in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(s) for s in items)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (type tag, default); None default means "required if used by the mode"
SCHEMA: dict[str, tuple[str, object]] = {
    "mode": ("str", None),
    "seed": ("int", None),
    "out": ("str", "."),
    "workers": ("int", 1),

    "system.m": ("float", 1.0),
    "system.B": ("float", 0.5),
    "system.A": ("float", 10.0),
    "system.Lambda": ("float", 10.0),
    "system.omega": ("float", 6.07),

    "measure.hbar": ("float", 1e-5),
    "measure.k": ("float", 1e5),
    "measure.eta": ("float", 1.0),

    # negative sentinel = derive from measure params via matched_noise
    "noise.sigma_x": ("float", -1.0),
    "noise.sigma_p": ("float", -1.0),
    "noise.vbar_x": ("float", 1e-5),

    "grid.x_min": ("float", -10.0),
    "grid.x_max": ("float", 10.0),
    "grid.n": ("int", 4096),

    "init.x0": ("float", -3.0),
    "init.p0": ("float", 8.0),
    "init.sigma": ("float", -1.0),   # negative = steady-state width heuristic

    "run.dt": ("float", 1e-3),
    "run.T": ("float", 10.0),
    "run.sample_every": ("int", 10),

    "record.window": ("float", 0.01),

    "branch.n_fiducial": ("int", 10),
    "branch.start_x": ("float", -3.0),
    "branch.start_p": ("float", 8.0),
    "branch.dispersion": ("float", 0.1),
    "branch.n_branch_points": ("int", 17),
    "branch.spacing": ("float", 20.0),
    "branch.track_time": ("float", 8.0),
    "branch.mode": ("str", NOISE),
    "branch.delta0": ("float", 1e-6),

    "fit.lo": ("float", 1.0),
    "fit.hi": ("float", 6.0),
    "fit.weight": ("float", 1.0),

    "lyapunov.system": ("str", "classical"),
    "strobe.system": ("str", "classical"),
    "strobe.phase": ("float", 0.0),
    "strobe.t_skip": ("float", 0.0),
    "ensemble.n_traj": ("int", 1),

    "sweep.k_values": ("floatlist", (1e5,)),

    "regime.dFdx": ("float", 20.0),
    "regime.d2F_over_F": ("float", 1.0),
    "regime.action": ("float", 10.0),
    "regime.record_dt": ("float", 0.01),
    "regime.record_dx": ("float", 0.01),

    "output.figures": ("bool", True),
}

_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "floatlist": _parse_float_list,
}


@dataclass
class RunConfig:
    """Fully resolved configuration; ``values`` covers every schema key."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    # --- typed sub-configurations -------------------------------------
    @property
    def mode(self) -> str:
        return self.values["mode"]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def system(self) -> SystemParams:
        v = self.values
        return SystemParams(m=v["system.m"], B=v["system.B"], A=v["system.A"],
                            Lambda=v["system.Lambda"], omega=v["system.omega"])

    def measure(self) -> MeasureParams:
        v = self.values
        return MeasureParams(hbar=v["measure.hbar"], k=v["measure.k"],
                             eta=v["measure.eta"])

    def noise(self) -> NoiseSpec:
        v = self.values
        sx, sp_ = v["noise.sigma_x"], v["noise.sigma_p"]
        if sx < 0 or sp_ < 0:
            derived = matched_noise(self.measure(), v["noise.vbar_x"])
            sx = sx if sx >= 0 else derived.sigma_x
            sp_ = sp_ if sp_ >= 0 else derived.sigma_p
        return NoiseSpec(sigma_x=sx, sigma_p=sp_)

    def grid(self) -> Grid:
        v = self.values
        return make_grid(v["grid.x_min"], v["grid.x_max"], v["grid.n"])

    def init_sigma(self) -> float:
        sigma = self.values["init.sigma"]
        if sigma > 0:
            return sigma
        # heuristic: the steady-state width of a continuously measured
        # free particle, sqrt(Vx) with Vx = sqrt(hbar / (8 m k))
        mp, sp_ = self.measure(), self.system()
        if mp.k <= 0:
            raise QtlError("init.sigma must be set explicitly when k = 0")
        return (mp.hbar / (8.0 * sp_.m * mp.k)) ** 0.25

    def branch(self) -> BranchProtocol:
        v = self.values
        return BranchProtocol(
            n_fiducial=v["branch.n_fiducial"],
            start=(v["branch.start_x"], v["branch.start_p"]),
            start_dispersion=v["branch.dispersion"],
            n_branch_points=v["branch.n_branch_points"],
            branch_spacing=v["branch.spacing"],
            track_time=v["branch.track_time"],
            perturbation_mode=v["branch.mode"],
            delta0=v["branch.delta0"],
        )

    def fit_window(self) -> tuple[float, float]:
        return (self.values["fit.lo"], self.values["fit.hi"])

    def regime_inputs(self) -> tuple[dict, dict]:
        v = self.values
        traj_stats = {"dFdx": v["regime.dFdx"],
                      "d2F_over_F": v["regime.d2F_over_F"],
                      "action": v["regime.action"]}
        record_spec = {"dt": v["regime.record_dt"], "dx": v["regime.record_dx"]}
        return traj_stats, record_spec

    def fingerprint(self) -> str:
        return hashlib.sha256(render_config(self).encode()).hexdigest()[:16]


def render_config(config: RunConfig) -> str:
    """Canonical text form: every key, sorted, one per line."""
    lines = [f"{key} = {_fmt(config.values[key])}" for key in sorted(config.values)]
    return "\n".join(lines) + "\n"


def _validate(values: dict, lines_by_key: dict) -> None:
    def fail(key, message):
        raise ConfigError(message, lines_by_key.get(key))

    v = values
    if v["mode"] not in MODES:
        fail("mode", f"mode must be one of {', '.join(MODES)}, got {v['mode']!r}")
    if v["mode"] in STOCHASTIC_MODES and v["seed"] is None:
        fail("seed", f"seed is required for mode {v['mode']!r}")
    if v["seed"] is None:
        v["seed"] = 0
    if v["seed"] < 0:
        fail("seed", "seed must be a non-negative 64-bit integer")

    if not (0.0 < v["measure.eta"] <= 1.0):
        fail("measure.eta", "eta out of (0,1]")
    if v["measure.hbar"] <= 0:
        fail("measure.hbar", "hbar must be positive")
    if v["measure.k"] < 0:
        fail("measure.k", "k must be non-negative")
    if v["system.m"] <= 0:
        fail("system.m", "m must be positive")
    if v["system.B"] < 0:
        fail("system.B", "B must be non-negative")
    if v["system.Lambda"] != 0 and v["system.omega"] <= 0:
        fail("system.omega", "omega must be positive when the drive is on")
    if v["run.dt"] <= 0:
        fail("run.dt", "dt must be positive")
    if v["run.T"] <= 0:
        fail("run.T", "T must be positive")
    if v["run.sample_every"] < 1:
        fail("run.sample_every", "sample_every must be >= 1")
    if v["grid.x_max"] <= v["grid.x_min"]:
        fail("grid.x_max", "degenerate grid interval")
    n = v["grid.n"]
    if n < 16 or (n & (n - 1)) != 0:
        fail("grid.n", "grid.n must be a power of two >= 16")
    if v["record.window"] <= 0:
        fail("record.window", "record window must be positive")
    if v["branch.mode"] not in (NOISE, OFFSET):
        fail("branch.mode", f"branch.mode must be {NOISE!r} or {OFFSET!r}")
    if v["branch.n_fiducial"] < 1:
        fail("branch.n_fiducial", "n_fiducial must be >= 1")
    if v["branch.n_branch_points"] < 1:
        fail("branch.n_branch_points", "n_branch_points must be >= 1")
    if not (0.0 <= v["fit.lo"] < v["fit.hi"]):
        fail("fit.hi", "fit window must satisfy 0 <= lo < hi")
    if v["fit.hi"] > v["branch.track_time"]:
        fail("fit.hi", "fit window extends past track_time")
    if v["lyapunov.system"] not in ("classical", "quantum"):
        fail("lyapunov.system", "lyapunov.system must be classical or quantum")
    if v["strobe.system"] not in ("classical", "quantum"):
        fail("strobe.system", "strobe.system must be classical or quantum")
    if v["ensemble.n_traj"] < 1:
        fail("ensemble.n_traj", "ensemble.n_traj must be >= 1")
    if v["workers"] < 1:
        fail("workers", "workers must be >= 1")
    for key in ("regime.dFdx", "regime.action", "regime.record_dt",
                "regime.record_dx"):
        if v[key] <= 0:
            fail(key, f"{key} must be positive")
    if v["regime.d2F_over_F"] < 0:
        fail("regime.d2F_over_F", "regime.d2F_over_F must be non-negative")
    if any(k <= 0 for k in v["sweep.k_values"]):
        fail("sweep.k_values", "sweep k values must be positive")


def parse_config(text: str, mode_override: str | None = None,
                 seed_override: int | None = None,
                 overrides: dict | None = None) -> RunConfig:
    """Parse and validate configuration text.

    Unknown keys, type mismatches, and invariant violations raise
    ConfigError with the offending line number.  Omitted keys take the
    documented defaults; ``mode`` (and ``seed`` for stochastic modes)
    must come from the text or from the override arguments.
    """
    values = {key: default for key, (_, default) in SCHEMA.items()}
    lines_by_key: dict[str, int] = {}
    seen: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value_text = line.partition("=")
        key, value_text = key.strip(), value_text.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        seen.add(key)
        type_tag = SCHEMA[key][0]
        try:
            values[key] = _PARSERS[type_tag](value_text)
        except ValueError:
            raise ConfigError(
                f"value for {key!r} is not a valid {type_tag}: {value_text!r}",
                lineno) from None
        lines_by_key[key] = lineno

    if mode_override is not None:
        values["mode"] = mode_override
    if seed_override is not None:
        values["seed"] = seed_override
    if overrides:
        for key, val in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown override key {key!r}")
            values[key] = val
    if values["mode"] is None:
        required = ["mode"] + (["seed"] if values["seed"] is None else [])
        raise ConfigError(f"missing required keys: {', '.join(required)}")

    _validate(values, lines_by_key)
    return RunConfig(values=values)
