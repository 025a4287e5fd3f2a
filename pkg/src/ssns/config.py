"""Run configuration: flat ``key = value`` files, validation and hashing.

Every key has a documented default except ``seed``, which must be given;
nothing is ever seeded from the clock.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _positive(v):
    return v > 0


def _odd_order(v):
    return v >= 17 and v % 2 == 1


# key: (parser, default, check, description)
KEYS = {
    "seed": (int, None, lambda v: v >= 0, "random seed for all probes (mandatory)"),
    "grid.n": (int, 95, _odd_order, "radial polynomial order (odd, >= 17)"),
    "grid.map_scale": (float, 8.0, _positive, "algebraic map scale c in r = c x / (1 - x^2)"),
    "grid.lmax": (int, 6, lambda v: 1 <= v <= 24, "highest Legendre degree"),
    "datum": (str, "swirl", lambda v: v in ("swirl",), "initial datum family"),
    "profile.sigma": (float, 0.1, lambda v: v >= 0, "amplitude sigma of the profile"),
    "tol.newton": (float, 1e-10, _positive, "Newton residual tolerance (X-norm)"),
    "tol.picard": (float, 1e-8, _positive, "Picard increment tolerance"),
    "continue.target": (float, 0.5, lambda v: v >= 0, "final sigma of the continuation"),
    "continue.step": (float, 0.05, _positive, "natural continuation step"),
    "continue.sv_threshold": (float, 1e-3, _positive, "singular-value switch to pseudo-arclength"),
    "spectrum.how_many": (int, 8, lambda v: v >= 1, "number of Ritz values reported"),
    "spectrum.T": (float, 1.0, _positive, "propagator time for Arnoldi"),
    "spectrum.margin": (float, 0.05, _positive, "margin above the band edge -1/4"),
    "spectrum.symmetry": (str, "full", lambda v: v in ("full", "axi", "axisymmetric_only"), "symmetry class"),
    "spectrum.horizon": (float, 20.0, _positive, "horizon for the growth-bound fit"),
    "track.how_many": (int, 4, lambda v: v >= 1, "eigenvalues followed along the branch"),
    "track.tol": (float, 1e-4, _positive, "imaginary-part tolerance of the crossing classifier"),
    "ancient.amplitude": (float, 1e-3, _positive, "X-norm of the unstable seed at t = 0"),
    "ancient.T_back": (float, 160.0, _positive, "backward horizon (>= 5 / beta)"),
    "ancient.h": (float, 0.1, _positive, "time step"),
    "ancient.method": (str, "fixed_point", lambda v: v in ("fixed_point", "shoot"), "construction"),
    "ancient.synthetic": (_bool, True, lambda v: True, "use a planted scenario-A operator when none is certified"),
    "ancient.beta": (float, 1 / 32, lambda v: 0 < v <= 1 / 32, "planted growth rate"),
    "ancient.omega": (float, 0.25, _positive, "planted frequency"),
    "localize.R": (float, 4.0, lambda v: v >= 1, "truncation radius"),
    "localize.T": (float, 1.0, lambda v: 0 < v <= 1, "horizon"),
    "localize.t_min": (float, 1e-4, _positive, "smallest physical time sampled"),
    "localize.h": (float, 0.05, _positive, "log-time step in the window"),
    "localize.eps": (float, 1e-3, _positive, "size of the synthetic perturbation"),
    "localize.beta": (float, 1 / 32, _positive, "growth rate of the synthetic perturbation"),
    "model.n": (int, 3, lambda v: v >= 1, "dimension of the scalar model"),
    "model.alpha": (float, 2.0, _positive, "potential scaling exponent"),
    "model.kappas": (_floats, (0.0, 0.5, 1.0, 1.5), lambda v: len(v) > 0, "potential strengths (comma list)"),
    "model.p_list": (_floats, (1.2, 2.0, 4.0), lambda v: all(p > 1 for p in v), "L^p exponents (comma list)"),
    "model.t0": (float, 1.0, _positive, "start time of the sweep"),
    "verify.criteria": (str, "all", lambda v: True, "'all' or a comma list of criterion numbers"),
    "verify.repeat": (int, 2, lambda v: v in (1, 2), "run the checks twice to test determinism"),
}


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def emit(self) -> str:
        """Effective configuration, one documented key per line."""
        lines = []
        for key in KEYS:
            lines.append(f"# {KEYS[key][3]}")
            lines.append(f"{key} = {_format(self.values[key])}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        canon = "\n".join(f"{k}={_format(self.values[k])}" for k in sorted(self.values))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, pairs) -> "RunConfig":
        text = self.emit() + "\n".join(pairs) + "\n"
        return parse_config(text)

    def criteria(self):
        spec = self.values["verify.criteria"].strip()
        if spec == "all":
            return None
        return [int(v) for v in spec.split(",") if v.strip()]


def parse_config(text: str) -> RunConfig:
    raw = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = value
    if "seed" not in raw:
        raise ConfigError("missing mandatory key 'seed'")
    values = {}
    for key, (parse, default, check, _) in KEYS.items():
        if key in raw:
            try:
                val = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: malformed value {raw[key]!r} ({exc})") from None
        else:
            val = default
        if not check(val):
            raise ConfigError(f"{key}: invalid value {raw.get(key, val)!r}")
        values[key] = val
    if values["verify.criteria"] != "all":
        try:
            nums = [int(v) for v in values["verify.criteria"].split(",") if v.strip()]
        except ValueError:
            raise ConfigError("verify.criteria: expected 'all' or integers") from None
        if not nums or any(n < 1 or n > 12 for n in nums):
            raise ConfigError("verify.criteria: numbers must lie in 1..12")
    return RunConfig(values)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def worker_count(default: int | None = None) -> int:
    """Worker cap from SSNS_THREADS (at least 1)."""
    env = os.environ.get("SSNS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, default or os.cpu_count() or 1)
