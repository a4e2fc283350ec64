"""Run configuration: ``section.key = value`` text files.

Blank lines and ``#`` comments are ignored.  Every key has a default, so an
empty file is a valid configuration.  Unknown keys are rejected.
"""
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional


class ConfigError(ValueError):
    """Parse or validation failure; ``key`` and ``line`` locate the problem."""

    def __init__(self, msg, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(f"{': '.join(where)}: {msg}" if where else msg)
        self.key = key
        self.line = line


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    if s is None or str(s).strip().lower() in ("", "none", "auto"):
        return None
    return float(s)


def _choice(*opts):
    def conv(s):
        v = str(s).strip().lower()
        if v == "auto" and "auto" in opts:
            return v
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return v
    return conv


# key -> (converter, default)
SCHEMA: Dict[str, tuple] = {
    "surface": (_choice("sphere", "torus"), "sphere"),
    "model": (_choice("ch", "nsch"), "ch"),
    "sphere.radius": (float, 1.0),
    "torus.R": (float, 1.0),
    "torus.r_min": (float, 0.3),
    "torus.r_max": (float, 0.6),
    "mesh.level": (int, 3),
    "mesh.extra_surface_levels": (int, 0),
    "mesh.box_half_width": (float, 5.0 / 3.0),
    "phys.epsilon": (float, 0.02),
    "phys.D": (float, 0.02),
    "phys.gamma_c": (float, 1.0),
    "phys.mobility": (_choice("degenerate", "constant", "auto"), "auto"),
    "phys.rho1": (float, 3.0),
    "phys.rho2": (float, 1.0),
    "phys.eta1": (float, 0.01),
    "phys.eta2": (float, 0.0008),
    "phys.sigma_gamma": (float, 0.04),
    "phys.M": (float, 0.02),
    "ic.a": (float, 0.5),
    "ic.seed": (int, 0),
    "time.T": (float, 100.0),
    "time.dt0": (float, 1e-3),
    "time.dt_min": (float, 1e-5),
    "time.dt_max": (float, 1.0),
    "time.tol_dt": (_opt_float, None),
    "time.adaptive": (_bool, True),
    "stab.tau_mu_scale": (float, 1.0),
    "stab.tau_c_scale": (float, 1.0),
    "stab.tau_scale": (float, 1.0),
    "stab.beta_u_scale": (float, 1.0),
    "stab.beta_p_scale": (float, 1.0),
    "stab.grad_div": (float, 1.0),
    "linalg.rtol": (float, 1e-10),
    "linalg.max_iter": (int, 2000),
    "linalg.direct_threshold": (int, 200_000),
    "quadrature.surface_order": (int, 4),
    "quadrature.volume_order": (int, 2),
    "geometry.use_exact_normals": (_bool, False),
    "output.dir": (str, "output"),
    "output.every_t": (float, 1.0),
    "output.vtk": (_bool, True),
    "output.wall_time": (_bool, False),
}

_POSITIVE = (
    "sphere.radius", "torus.R", "mesh.box_half_width", "phys.epsilon", "phys.D", "phys.rho1",
    "phys.rho2", "phys.eta1", "phys.eta2", "phys.M", "time.dt0", "time.dt_min", "time.dt_max",
    "linalg.rtol", "linalg.max_iter", "linalg.direct_threshold", "output.every_t",
)
_NONNEG = (
    "phys.gamma_c", "phys.sigma_gamma", "time.T", "mesh.level", "mesh.extra_surface_levels",
    "stab.tau_mu_scale", "stab.tau_c_scale", "stab.tau_scale", "stab.beta_u_scale",
    "stab.beta_p_scale", "stab.grad_div",
)


@dataclass(frozen=True)
class SimulationConfig:
    """Validated key/value configuration with defaults filled in."""

    values: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def mobility(self):
        m = self.values["phys.mobility"]
        if m == "auto":
            return "constant" if self.values["model"] == "nsch" else "degenerate"
        return m

    @property
    def tol_dt(self):
        tol = self.values["time.tol_dt"]
        return 0.1 * self.values["phys.epsilon"] if tol is None else tol

    def with_updates(self, **updates):
        """Copy with ``section__key=value`` or ``{"section.key": value}`` overrides."""
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return make_config(vals, self.source)

    def canonical_text(self):
        """Sorted ``key = repr(value)`` lines; the output location is excluded."""
        keys = sorted(k for k in self.values if k != "output.dir")
        return "".join(f"{k} = {self.values[k]!r}\n" for k in keys)

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def make_config(values=None, source=None) -> SimulationConfig:
    """Fill defaults, convert types and validate a mapping of keys."""
    vals = {k: d for k, (_, d) in SCHEMA.items()}
    for k, v in (values or {}).items():
        if k not in SCHEMA:
            raise ConfigError("unknown key", key=k)
        conv = SCHEMA[k][0]
        try:
            vals[k] = conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value {v!r} ({exc})", key=k) from None
    _validate(vals)
    return SimulationConfig(vals, source)


def _validate(v):
    for k in _POSITIVE:
        if not v[k] > 0:
            raise ConfigError(f"must be positive, got {v[k]!r}", key=k)
    for k in _NONNEG:
        if not v[k] >= 0:
            raise ConfigError(f"must be nonnegative, got {v[k]!r}", key=k)
    if v["phys.rho1"] < v["phys.rho2"]:
        raise ConfigError("densities must satisfy rho1 >= rho2", key="phys.rho1")
    if not 0.0 <= v["ic.a"] <= 1.0:
        raise ConfigError("Bernoulli probability must lie in [0, 1]", key="ic.a")
    if not 0 < v["torus.r_min"] <= v["torus.r_max"] < v["torus.R"]:
        raise ConfigError("torus needs 0 < r_min <= r_max < R", key="torus.r_min")
    if v["time.dt_min"] > v["time.dt_max"]:
        raise ConfigError("dt_min exceeds dt_max", key="time.dt_min")
    if v["time.tol_dt"] is not None and not v["time.tol_dt"] > 0:
        raise ConfigError("must be positive", key="time.tol_dt")
    if v["quadrature.surface_order"] not in (2, 4, 6):
        raise ConfigError("surface quadrature order must be 2, 4 or 6", key="quadrature.surface_order")
    if v["quadrature.volume_order"] not in (1, 2, 4):
        raise ConfigError("volume quadrature order must be 1, 2 or 4", key="quadrature.volume_order")


def parse_config(text: str, source=None) -> SimulationConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=lineno)
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=lineno)
        try:
            values[key] = SCHEMA[key][0](val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value {val!r} ({exc})", key=key, line=lineno) from None
    return make_config(values, source)


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path} is not UTF-8 ({exc})") from None
    return parse_config(text, str(path))


def default_config() -> SimulationConfig:
    return make_config()
