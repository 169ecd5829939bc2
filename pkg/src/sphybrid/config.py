"""JSON run configuration.

Example::

    {
      "system": {
        "epsilon": 0.001,
        "modes": [
          {"A": [[-1, 0.5], [-1, -2]], "mask": ["slow", "fast"]},
          {"A": [[-2.5, -2], [3, 1]], "mask": ["fast", "slow"]}
        ],
        "jumps": [[[1, 0], [0, 1]]],
        "transitions": [[0, 0, 1], [1, 0, 0]],
        "augment": false
      },
      "certify": {"eps": [0.001], "method": "scalar_optimal_q", "strict_b3": false},
      "simulate": {"x0": [2, 1], "schedule": {"kind": "periodic", "tau": 0.2},
                   "horizon": 40.0, "sample_dt": 0.01},
      "output_dir": "out"
    }

``transitions`` is optional (all shape-compatible triples by default).
``certify.overrides`` maps a mode index to ``{"Qs", "lam_s", "Qf", "lam_f"}``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .certify import ModeLyapunov
from .errors import ConfigError
from .model import HybridSystemSpec, Mode, Transition

SCHEDULE_KINDS = ("periodic", "explicit", "random")


def _matrix(x, what):
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: not a numeric matrix") from exc
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ConfigError(f"{what}: expected a nested list of rows")
    return a


def _mask(x, what):
    if not isinstance(x, list) or not all(v in ("slow", "fast") for v in x):
        raise ConfigError(f"{what}: mask must be a list of \"slow\"/\"fast\"")
    return tuple(v == "fast" for v in x)


def spec_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("system must be an object")
    try:
        eps = float(d["epsilon"])
        modes = [Mode(_matrix(m["A"], f"mode {i} A"), _mask(m["mask"], f"mode {i}")) for i, m in enumerate(d["modes"])]
        jumps = [_matrix(J, f"jump {j}") for j, J in enumerate(d["jumps"])]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"system: missing or malformed field {exc}") from exc
    trans = d.get("transitions")
    if trans is not None:
        try:
            trans = tuple(Transition(*(int(v) for v in t)) for t in trans)
        except (TypeError, ValueError) as exc:
            raise ConfigError("transitions must be [source, jump, target] triples") from exc
    return HybridSystemSpec(eps, tuple(modes), tuple(jumps), trans, bool(d.get("augment", False)))


def spec_to_dict(spec):
    return {
        "epsilon": spec.epsilon,
        "modes": [{"A": m.A.tolist(), "mask": ["fast" if f else "slow" for f in m.fast_mask]} for m in spec.modes],
        "jumps": [J.tolist() for J in spec.jumps],
        "transitions": [[t.source, t.jump, t.target] for t in spec.transitions],
        "augment": spec.augment,
    }


def _overrides_from(d):
    out = {}
    for k, v in (d or {}).items():
        try:
            out[int(k)] = ModeLyapunov(_matrix(v["Qs"], "Qs"), float(v["lam_s"]), _matrix(v["Qf"], "Qf"), float(v["lam_f"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"override for mode {k}: {exc}") from exc
    return out


@dataclass
class RunConfig:
    system: HybridSystemSpec
    eps: list = field(default_factory=list)
    method: str = "lyapunov"
    kappa: float = None
    strict_b3: bool = False
    overrides: dict = field(default_factory=dict)
    x0: list = None
    schedule: dict = None
    horizon: float = None
    sample_dt: float = None
    output_dir: str = None

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "system" not in d:
            raise ConfigError("config must be an object with a \"system\" entry")
        c = d.get("certify", {}) or {}
        s = d.get("simulate", {}) or {}
        method = c.get("method", "lyapunov")
        if method not in ("lyapunov", "scalar_optimal_q"):
            raise ConfigError(f"unknown method {method!r}")
        sched = s.get("schedule")
        if sched is not None and (not isinstance(sched, dict) or sched.get("kind") not in SCHEDULE_KINDS):
            raise ConfigError(f"schedule.kind must be one of {SCHEDULE_KINDS}")
        try:
            eps = [float(e) for e in c.get("eps", [])]
            x0 = None if s.get("x0") is None else [float(v) for v in s["x0"]]
            horizon = None if s.get("horizon") is None else float(s["horizon"])
            sample_dt = None if s.get("sample_dt") is None else float(s["sample_dt"])
            kappa = None if c.get("kappa") is None else float(c["kappa"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed numeric option: {exc}") from exc
        return cls(
            system=spec_from_dict(d["system"]),
            eps=eps,
            method=method,
            kappa=kappa,
            strict_b3=bool(c.get("strict_b3", False)),
            overrides=_overrides_from(c.get("overrides")),
            x0=x0,
            schedule=sched,
            horizon=horizon,
            sample_dt=sample_dt,
            output_dir=d.get("output_dir"),
        )

    def to_dict(self):
        c = {"eps": list(self.eps), "method": self.method, "strict_b3": self.strict_b3}
        if self.kappa is not None:
            c["kappa"] = self.kappa
        if self.overrides:
            c["overrides"] = {
                str(k): {"Qs": np.asarray(v.Qs).tolist(), "lam_s": v.lam_s, "Qf": np.asarray(v.Qf).tolist(), "lam_f": v.lam_f}
                for k, v in sorted(self.overrides.items())
            }
        s = {}
        for key in ("x0", "schedule", "horizon", "sample_dt"):
            if getattr(self, key) is not None:
                s[key] = getattr(self, key)
        d = {"system": spec_to_dict(self.system), "certify": c, "simulate": s}
        if self.output_dir is not None:
            d["output_dir"] = self.output_dir
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.loads(text)
