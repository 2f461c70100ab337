"""Flat ``key = value`` run configuration validated against a fixed schema.

Files are UTF-8 text with one assignment per line; ``#`` starts a comment.
Keys not listed in :data:`SCHEMA` are rejected, as are values that fail to
parse or fall outside their allowed range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

from .errors import ConfigError


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def _cutoff(text: str):
    low = text.strip().lower()
    return low if low == "auto" else _optional_int(text)


def _float(text: str) -> float:
    t = text.strip().lower().replace("pi", repr(math.pi))
    # accept simple products such as "2*pi" without a general expression parser
    value = 1.0
    for part in t.split("*"):
        value *= float(part)
    return value


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str
    choices: tuple | None = None
    check: Callable[[Any], bool] | None = None
    requirement: str = ""


_pos = (lambda x: x > 0, "must be positive")
_nonneg = (lambda x: x >= 0, "must be nonnegative")


def _k(parse, default, help, choices=None, rule=None):
    check, req = rule if rule else (None, "")
    return Key(parse, default, help, choices, check, req)


SCHEMA: dict[str, Key] = {
    "grid.L": _k(_float, 2 * math.pi, "domain length (bohr)", rule=_pos),
    "grid.M": _k(int, 64, "number of grid nodes", rule=(lambda m: m >= 8, "must be >= 8")),
    "grid.boundary": _k(str, "periodic", "boundary condition", ("periodic", "dirichlet")),
    "grid.origin": _k(_float, 0.0, "left end of the domain"),
    "time.T": _k(_float, 1.0, "propagation horizon (hartree^-1)", rule=_pos),
    "time.steps": _k(int, 200, "number of time steps", rule=(lambda n: n >= 1, "must be >= 1")),
    "particles.N": _k(int, 1, "particle count", (1, 2)),
    "interaction.strength": _k(_float, 0.0, "soft-core strength (0 disables)", rule=_nonneg),
    "interaction.softening": _k(_float, 1.0, "soft-core softening length", rule=_pos),
    "potential.form": _k(str, "cos", "static potential",
                         ("zero", "cos", "harmonic", "file")),
    "potential.amplitude": _k(_float, 1.0, "amplitude of the cos form"),
    "potential.k": _k(int, 1, "wavenumber index of the cos form"),
    "potential.omega": _k(_float, 1.0, "frequency of the harmonic form", rule=_pos),
    "potential.center": _k(_float, 0.0, "center of the harmonic form"),
    "potential.file": _k(str, "", "DPMF file with the static potential (rank 1)"),
    "drive.form": _k(str, "sin_cos", "time-dependent part added to the static potential",
                     ("none", "sin_cos", "sin_sin", "linear_cos", "dipole")),
    "drive.amplitude": _k(_float, 0.2, "drive amplitude"),
    "drive.omega": _k(_float, 1.0, "drive angular frequency"),
    "drive.k": _k(int, 1, "drive wavenumber index"),
    "state.form": _k(str, "ground", "initial state", ("ground", "constant", "gaussian", "file")),
    "state.sigma": _k(_float, 1.0, "Gaussian width", rule=_pos),
    "state.x0": _k(_float, 0.0, "Gaussian center"),
    "state.k0": _k(_float, 0.0, "Gaussian carrier wavenumber"),
    "state.file": _k(str, "", "DPMF file with the initial amplitudes"),
    "spectrum.K": _k(int, 8, "number of eigenpairs", rule=(lambda k: k >= 1, "must be >= 1")),
    "inversion.alpha": _k(_float, 1.0, "mixing parameter",
                          rule=(lambda a: 0 < a <= 1, "must lie in (0, 1]")),
    "inversion.tol_v": _k(_float, 1e-8, "stopping tolerance", rule=_pos),
    "inversion.max_iter": _k(int, 50, "iteration cap", rule=(lambda n: n >= 1, "must be >= 1")),
    "inversion.window": _k(_optional_int, None, "steps per restart window"),
    "inversion.cutoff": _k(_cutoff, "auto", "spatial mode cutoff; auto keeps M // 16 modes"),
    "inversion.v0": _k(str, "static", "initial guess", ("zero", "static")),
    "inversion.degeneracy": _k(str, "raise", "degenerate weight policy", ("raise", "report")),
    "inversion.taylor_order": _k(int, 2, "Taylor order K",
                                 rule=(lambda k: 0 <= k <= 8, "must lie in [0, 8]")),
    "inversion.taylor_h": _k(_float, 1e-2, "sampling step of the density derivatives",
                             rule=_pos),
    "inversion.target_file": _k(str, "", "DPMF target density (n_nodes x M); generated if empty"),
    "inversion.v_file": _k(str, "", "DPMF potential checked by verify-rho; generating one if empty"),
    "response.K": _k(int, 10, "excitations in the Lehmann sum", rule=(lambda k: k >= 1, "must be >= 1")),
    "response.gamma": _k(_float, 0.01, "Lorentzian broadening", rule=_pos),
    "response.kappa": _k(_float, 1e-3, "kick strength",
                         rule=(lambda k: 1e-6 <= k <= 1e-1, "must lie in [1e-6, 1e-1]")),
    "response.y": _k(_optional_int, None, "kick node index (default M // 4)"),
    "response.T": _k(_float, 10.0, "kick observation horizon", rule=_pos),
    "response.steps": _k(int, 4000, "kick time steps", rule=(lambda n: n >= 8, "must be >= 8")),
    "density.form": _k(str, "uniform_ball", "radial density", ("uniform_ball", "file")),
    "density.R": _k(_float, 1.0, "ball radius", rule=_pos),
    "density.N": _k(_float, 1.0, "particle number", rule=_nonneg),
    "density.h": _k(_float, 5e-4, "radial spacing", rule=_pos),
    "density.rmax": _k(_float, 1.5, "radial extent", rule=_pos),
    "density.scale": _k(_float, 2.0, "factor of the homogeneity check", rule=_pos),
    "density.file": _k(str, "", "DPMF radial density samples at r = h, 2h, ..."),
    "diagnose.s": _k(_float, 1.0, "exponent of the inverse-power integral",
                     rule=(lambda s: s > 0.5, "must exceed 0.5")),
    "io.outdir": _k(str, "out", "output directory"),
    "io.plots": _k(_bool, True, "render PNG figures next to the CSV files"),
}


def _coerce(key: str, raw: str):
    spec = SCHEMA.get(key)
    if spec is None:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        value = spec.parse(raw.strip())
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r} ({exc})") from exc
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(f"{key}: {value!r} not in {list(spec.choices)}")
    if spec.check is not None and value is not None and not spec.check(value):
        raise ConfigError(f"{key}: {value!r} {spec.requirement}")
    return value


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value`` strings from configuration text."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


class RunConfig(dict):
    """Validated configuration: a dict holding every schema key."""

    @classmethod
    def build(cls, raw: dict[str, str] | None = None) -> "RunConfig":
        cfg = cls({k: v.default for k, v in SCHEMA.items()})
        for key, value in (raw or {}).items():
            cfg[key] = _coerce(key, value)
        return cfg

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        raw: dict[str, str] = {}
        if path is not None:
            try:
                with open(path, encoding="utf-8") as fh:
                    raw = parse_text(fh.read(), str(path))
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for item in overrides:
            key, value = parse_override(item)
            raw[key] = value
        return cls.build(raw)

    def echo(self) -> str:
        """Canonical ``key = value`` listing of every setting."""
        return "".join(f"{k} = {self[k]!r}\n" for k in sorted(self))
