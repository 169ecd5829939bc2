"""Exact simulation of linear hybrid systems under an event schedule.

Flows are linear, so every step is an exact matrix exponential and the
sampled states do not depend on the sampling step.  The heavy loop lives in
the kernel backend (:mod:`sphybrid._backend`).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatchError
from .tolerances import (
    CONVERGENCE_DELTA,
    DIVERGENCE_FACTOR,
    OVERFLOW_MAGNITUDE,
    SUBSTEP_SLACK,
    TAIL_FRACTION,
)


@dataclass(frozen=True)
class LinearHybridSystem:
    """Mode generators ``dX/dt = G_i X`` and jump matrices per transition.

    Attributes
    ----------
    generators : tuple of ndarray
        One square matrix per mode; sizes may differ between modes.
    jumps : dict
        ``Transition -> matrix`` of shape ``(n_target, n_source)``.
    coords : str
        Coordinate system of the states: ``"original"``, ``"reordered"``,
        ``"decoupled"`` or ``"reduced"``.
    """

    generators: tuple
    jumps: dict
    coords: str = "original"

    @property
    def dims(self):
        return tuple(G.shape[0] for G in self.generators)

    @property
    def transitions(self):
        return tuple(self.jumps)

    @classmethod
    def from_spec(cls, spec):
        gens = tuple(m.generator(spec.epsilon) for m in spec.modes)
        jumps = {t: np.asarray(spec.jumps[t.jump]) for t in spec.transitions}
        return cls(gens, jumps, "original")

    @classmethod
    def from_reordered(cls, reordered):
        gens = tuple(reordered.generator(i) for i in range(reordered.n_modes))
        return cls(gens, dict(reordered.jumps), "reordered")

    @classmethod
    def from_decoupled(cls, decoupled):
        gens = tuple(decoupled.generator(i) for i in range(decoupled.n_modes))
        return cls(gens, {t: r.full for t, r in decoupled.R.items()}, "decoupled")

    @classmethod
    def from_reduced(cls, rom):
        return cls(tuple(np.asarray(A) for A in rom.A0), dict(rom.R11), "reduced")


@dataclass
class Trajectory:
    """Sampled trajectory.

    ``states`` is zero-padded to the largest mode dimension; use
    :meth:`state` for the active-mode part.  At every event time there are
    two samples: the pre-jump value (old mode) and the post-jump value (new
    mode, ``is_post_jump`` true).
    """

    t: np.ndarray
    mode: np.ndarray
    is_post_jump: np.ndarray
    states: np.ndarray
    dims: tuple
    coords: str
    horizon: float
    stopped: bool = False
    W_s: np.ndarray = None
    W_f: np.ndarray = None

    def __len__(self):
        return self.t.size

    def state(self, k):
        return self.states[k, : self.dims[self.mode[k]]]

    @property
    def norms(self):
        return np.linalg.norm(self.states, axis=1)


def _substeps(gap, dt):
    """Durations covering ``gap``: full ``dt`` steps then the remainder."""
    if gap <= (1.0 + SUBSTEP_SLACK) * dt:
        return [gap]
    m = int(math.floor(gap / dt))
    while m > 0 and gap - m * dt < SUBSTEP_SLACK * dt:
        m -= 1
    return [dt] * m + [gap - m * dt]


def simulate(system, schedule, sample_dt, x0, blowup=None):
    """Simulate ``system`` along ``schedule``.

    Parameters
    ----------
    system : LinearHybridSystem or HybridSystemSpec
    schedule : EventSchedule
    sample_dt : float
        Sampling step inside each interval; the interval end is always sampled.
    x0 : array_like
        Initial state in the first mode's coordinates.
    blowup : float, optional
        Magnitude at which the run stops; defaults to ``OVERFLOW_MAGNITUDE``.
        A stopped run is reported with ``stopped=True``, not as an error.

    Raises
    ------
    ScheduleIncompatibleError
        If an event uses a transition the system does not declare.
    DimensionMismatchError
        If ``x0`` does not fit the first mode.
    """
    if not isinstance(system, LinearHybridSystem):
        system = LinearHybridSystem.from_spec(system)
    if not sample_dt > 0:
        raise ValueError("sample_dt must be positive")
    schedule.check_against(system.jumps.keys(), n_modes=len(system.generators))
    dims = system.dims
    n = max(dims)
    x0 = np.asarray(x0, dtype=float).ravel()
    m0 = int(schedule.modes[0])
    if x0.size != dims[m0]:
        raise DimensionMismatchError(f"x0 has {x0.size} entries, mode {m0} has dimension {dims[m0]}")

    gens = np.zeros((len(dims), n, n))
    for i, G in enumerate(system.generators):
        gens[i, : dims[i], : dims[i]] = G
    used = {}
    jump_mats = []
    for t in schedule.triples():
        if t not in used:
            J = np.zeros((n, n))
            M = system.jumps[t]
            J[: M.shape[0], : M.shape[1]] = M
            used[t] = len(jump_mats)
            jump_mats.append(J)
    if not jump_mats:
        jump_mats.append(np.zeros((n, n)))
    triples = schedule.triples()

    rec_mode, rec_dt, rec_jump, rec_t = [], [], [], []
    gaps = schedule.gaps
    for k in range(len(schedule)):
        steps = _substeps(float(gaps[k]), float(sample_dt))
        t0 = float(schedule.times[k])
        has_event = k + 1 < len(schedule)
        end = float(schedule.times[k + 1]) if has_event else schedule.horizon
        for s, h in enumerate(steps):
            last = s == len(steps) - 1
            rec_mode.append(int(schedule.modes[k]))
            rec_dt.append(h)
            rec_t.append(end if last else t0 + (s + 1) * float(sample_dt))
            rec_jump.append(used[triples[k]] if last and has_event else -1)

    xpad = np.zeros(n)
    xpad[: x0.size] = x0
    lim = OVERFLOW_MAGNITUDE if blowup is None else float(blowup)
    pre, post, count, stopped = _backend.propagate(
        gens,
        np.array(rec_mode, dtype=np.intp),
        np.array(rec_dt),
        np.array(rec_jump, dtype=np.intp),
        np.array(jump_mats),
        xpad,
        lim,
    )

    # assemble samples: initial, then per record a pre sample and, at events,
    # a post-jump sample in the next mode
    n_jumps = sum(1 for j in rec_jump[:count] if j >= 0)
    N = 1 + count + n_jumps
    T = np.empty(N)
    MODE = np.empty(N, dtype=np.intp)
    POST = np.zeros(N, dtype=bool)
    X = np.empty((N, n))
    T[0], MODE[0], X[0] = 0.0, m0, xpad
    r = 1
    k_event = 0
    for k in range(count):
        T[r], MODE[r], X[r] = rec_t[k], rec_mode[k], pre[k]
        r += 1
        if rec_jump[k] >= 0:
            k_event += 1
            T[r], MODE[r], X[r], POST[r] = rec_t[k], int(schedule.modes[k_event]), post[k], True
            r += 1
    return Trajectory(
        t=T, mode=MODE, is_post_jump=POST, states=X, dims=dims, coords=system.coords,
        horizon=schedule.horizon, stopped=bool(stopped),
    )


def _xy_maps(coords, decoupled):
    """Per-mode matrix taking trajectory states to decoupled ``(x, y)``."""
    nm = decoupled.n_modes
    if coords == "decoupled":
        return [np.eye(decoupled.n_x + decoupled.n_z)] * nm
    if coords == "reordered":
        return [decoupled.modes[i].P for i in range(nm)]
    if coords == "original":
        S = decoupled.reordered.S
        return [decoupled.modes[i].P @ S[i] for i in range(nm)]
    raise DimensionMismatchError(f"witnesses are not defined for {coords!r} coordinates")


def witnesses(traj, lyap, decoupled):
    """Slow and fast Lyapunov magnitudes ``W_s = |Qs^{1/2} x|`` and ``W_f = |Qf^{1/2} y|``.

    Computed at every sample with the active mode's weights; stored on
    ``traj`` and returned.
    """
    from .linalg import principal_sqrt

    n = decoupled.n_x + decoupled.n_z
    if any(traj.dims[m] != n for m in np.unique(traj.mode)):
        raise DimensionMismatchError(f"trajectory states do not have dimension {n}")
    maps = _xy_maps(traj.coords, decoupled)
    rs = [principal_sqrt(m.Qs) for m in lyap.modes]
    rf = [principal_sqrt(m.Qf) for m in lyap.modes]
    nx = decoupled.n_x
    Ws = np.empty(len(traj))
    Wf = np.empty(len(traj))
    for i in range(decoupled.n_modes):
        sel = traj.mode == i
        if not np.any(sel):
            continue
        xy = traj.states[sel, :n] @ maps[i].T
        Ws[sel] = np.linalg.norm(xy[:, :nx] @ rs[i].T, axis=1)
        Wf[sel] = np.linalg.norm(xy[:, nx:] @ rf[i].T, axis=1)
    traj.W_s, traj.W_f = Ws, Wf
    return Ws, Wf


class Verdict(str, enum.Enum):
    CONVERGING = "Converging"
    DIVERGING = "Diverging"
    UNDECIDED = "Undecided"

    def __str__(self):
        return self.value


def classify(traj, horizon=None, delta=CONVERGENCE_DELTA, divergence_factor=DIVERGENCE_FACTOR):
    """Label a trajectory as converging, diverging or undecided.

    Converging: ``|X(T)| <= delta |X(0)|`` and every sample in the last
    ``TAIL_FRACTION`` of the run (by count) also stays below that level.
    Diverging: some sample exceeds ``divergence_factor * |X(0)|``, or the run
    stopped on overflow.
    """
    norms = traj.norms
    n0 = norms[0]
    if n0 == 0.0:
        return Verdict.CONVERGING
    if traj.stopped or not np.all(np.isfinite(norms)) or np.any(norms > divergence_factor * n0):
        return Verdict.DIVERGING
    horizon = traj.horizon if horizon is None else horizon
    if traj.t[-1] < horizon * (1 - 1e-12):
        return Verdict.UNDECIDED
    tail = max(1, int(math.ceil(TAIL_FRACTION * len(norms))))
    level = delta * n0
    if norms[-1] <= level and np.max(norms[-tail:]) <= level:
        return Verdict.CONVERGING
    return Verdict.UNDECIDED
