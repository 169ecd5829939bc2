"""Hybrid system description, validation, slow/fast reordering and augmentation.

A mode ``i`` flows as ``D^i dX/dt = A^i X`` where ``D^i`` is diagonal with
entry ``epsilon`` on fast coordinates and ``1`` on slow ones.  At an event
the state is mapped by a jump matrix ``J^j``.  Which ``(source, jump, target)``
triples may occur is declared by a list of :class:`Transition`.
"""

from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .errors import ScheduleIncompatibleError, ValidationError
from .tolerances import AUGMENT_RATE_FACTOR


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Mode:
    """One continuous mode: flow matrix ``A`` and per-coordinate fast flags."""

    A: np.ndarray
    fast_mask: tuple

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(np.atleast_2d(self.A)))
        object.__setattr__(self, "fast_mask", tuple(bool(f) for f in self.fast_mask))

    @property
    def n(self):
        return len(self.fast_mask)

    @property
    def n_fast(self):
        return sum(self.fast_mask)

    @property
    def n_slow(self):
        return self.n - self.n_fast

    def D_diag(self, epsilon):
        return np.where(self.fast_mask, epsilon, 1.0)

    def generator(self, epsilon):
        """``D^{-1} A``, the matrix with ``dX/dt = D^{-1} A X``."""
        return self.A / self.D_diag(epsilon)[:, None]


@dataclass(frozen=True, order=True)
class Transition:
    """An admissible event: leave ``source`` through jump ``jump`` into ``target``."""

    source: int
    jump: int
    target: int


@dataclass(frozen=True)
class Finding:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class HybridSystemSpec:
    """Original system description.

    Parameters
    ----------
    epsilon : float
        Time-scale ratio in (0, 1).
    modes : sequence of Mode
    jumps : sequence of array_like
        Jump matrices, each of shape ``(n_target, n_source)``.
    transitions : sequence of Transition, optional
        Admissible ``(source, jump, target)`` triples.  When omitted, every
        shape-compatible triple is admissible.
    augment : bool
        Allow mode-dependent slow/fast counts; they are removed by
        :func:`augment` before reordering.
    """

    epsilon: float
    modes: tuple
    jumps: tuple
    transitions: tuple = None
    augment: bool = False
    # For augmented systems: per mode, the number of leading coordinates that
    # belong to the original state.  ``None`` for non-augmented systems.
    original_dims: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "jumps", tuple(_frozen(np.atleast_2d(J)) for J in self.jumps))
        if self.transitions is None:
            trans = default_transitions(self.modes, self.jumps)
        else:
            trans = tuple(t if isinstance(t, Transition) else Transition(*t) for t in self.transitions)
        object.__setattr__(self, "transitions", tuple(trans))
        if self.original_dims is not None:
            object.__setattr__(self, "original_dims", tuple(int(d) for d in self.original_dims))

    @property
    def n_modes(self):
        return len(self.modes)

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)


def default_transitions(modes, jumps):
    """All ``(i, j, i')`` with ``jumps[j]`` of shape ``(n_{i'}, n_i)``."""
    out = []
    for (i, mi), (j, J), (k, mk) in product(enumerate(modes), enumerate(jumps), enumerate(modes)):
        if np.shape(J) == (mk.n, mi.n):
            out.append(Transition(i, j, k))
    return tuple(out)


def validate(spec):
    """Return a list of :class:`Finding` describing everything wrong with ``spec``."""
    findings = []
    eps = spec.epsilon
    if not (np.isfinite(eps) and 0.0 < eps < 1.0):
        findings.append(Finding("EpsilonOutOfRange", f"epsilon={eps} is not in (0, 1)"))
    if not spec.modes:
        findings.append(Finding("NoModes", "at least one mode is required"))
        return findings
    shapes_ok = True
    for i, m in enumerate(spec.modes):
        if m.A.ndim != 2 or m.A.shape[0] != m.A.shape[1]:
            findings.append(Finding("ShapeMismatch", f"mode {i}: flow matrix has shape {m.A.shape}"))
            shapes_ok = False
        elif m.A.shape[0] != m.n:
            findings.append(
                Finding("MaskLength", f"mode {i}: fast mask has length {m.n}, flow matrix is {m.A.shape[0]}x{m.A.shape[0]}")
            )
            shapes_ok = False
        if not np.all(np.isfinite(m.A)):
            findings.append(Finding("NonFinite", f"mode {i}: flow matrix has non-finite entries"))
    for j, J in enumerate(spec.jumps):
        if not np.all(np.isfinite(J)):
            findings.append(Finding("NonFinite", f"jump {j}: matrix has non-finite entries"))
    if not shapes_ok:
        return findings

    n_modes, n_jumps = len(spec.modes), len(spec.jumps)
    bad_index = [t for t in spec.transitions if not (0 <= t.source < n_modes and 0 <= t.target < n_modes and 0 <= t.jump < n_jumps)]
    for t in bad_index:
        findings.append(Finding("UnknownIndex", f"transition {t} refers to a missing mode or jump"))
    by_jump = {}
    for t in spec.transitions:
        if t in bad_index:
            continue
        want = (spec.modes[t.target].n, spec.modes[t.source].n)
        if spec.jumps[t.jump].shape != want:
            by_jump.setdefault(t.jump, []).append((t, want))
    for j, J in enumerate(spec.jumps):
        if j in by_jump:
            bad = ", ".join(f"({t.source},{t.jump},{t.target}) needs {w[0]}x{w[1]}" for t, w in by_jump[j])
            findings.append(Finding("ShapeMismatch", f"jump {j} has shape {J.shape[0]}x{J.shape[1]}: {bad}"))
        elif not any(J.shape == (mk.n, mi.n) for mi in spec.modes for mk in spec.modes):
            findings.append(Finding("ShapeMismatch", f"jump {j} has shape {J.shape[0]}x{J.shape[1]}, which fits no mode pair"))
    if not spec.transitions:
        findings.append(Finding("NoTransitions", "no admissible transition is declared"))

    fast = {m.n_fast for m in spec.modes}
    slow = {m.n_slow for m in spec.modes}
    if not spec.augment:
        if len(fast) > 1:
            findings.append(
                Finding("NonConstantFastCount", f"fast counts {sorted(fast)} differ across modes; enable augmentation")
            )
        elif len(slow) > 1:
            findings.append(
                Finding("NonConstantSlowCount", f"slow counts {sorted(slow)} differ across modes; enable augmentation")
            )
    if max(slow) == 0:
        findings.append(Finding("EmptySlowBlock", "no slow coordinates; both blocks must be nonempty"))
    if max(fast) == 0:
        findings.append(Finding("EmptyFastBlock", "no fast coordinates; both blocks must be nonempty"))
    return findings


def check(spec):
    """Raise :class:`ValidationError` if :func:`validate` reports anything."""
    findings = validate(spec)
    if findings:
        raise ValidationError(findings)
    return spec


def build_permutation(fast_mask):
    """Permutation matrix putting slow coordinates first, fast ones last.

    Each group keeps its original order, so ``S @ X`` lists the slow entries
    of ``X`` followed by the fast entries.
    """
    mask = np.asarray(fast_mask, dtype=bool)
    order = np.concatenate([np.flatnonzero(~mask), np.flatnonzero(mask)])
    return np.eye(mask.size)[order]


@dataclass(frozen=True)
class ReorderedSystem:
    """System in slow-first coordinates ``(x, z) = S_i X``.

    Attributes
    ----------
    A : tuple of ndarray
        ``S_i A^i S_i^T`` for each mode.
    jumps : dict
        ``Transition -> S_{i'} J^j S_i^T``.
    """

    epsilon: float
    n_x: int
    n_z: int
    S: tuple
    A: tuple
    jumps: dict
    transitions: tuple
    spec: HybridSystemSpec = field(repr=False, default=None)

    @property
    def n(self):
        return self.n_x + self.n_z

    @property
    def n_modes(self):
        return len(self.A)

    def block(self, i, name):
        nx = self.n_x
        A = self.A[i]
        return {
            "A11": A[:nx, :nx],
            "A12": A[:nx, nx:],
            "A21": A[nx:, :nx],
            "A22": A[nx:, nx:],
        }[name]

    def D_diag(self):
        return np.concatenate([np.ones(self.n_x), np.full(self.n_z, self.epsilon)])

    def generator(self, i):
        return self.A[i] / self.D_diag()[:, None]

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=float(epsilon), spec=None if self.spec is None else self.spec.with_epsilon(epsilon))


def reorder(spec):
    """Build the slow-first :class:`ReorderedSystem` of a validated spec."""
    check(spec)
    if len({m.n_fast for m in spec.modes}) > 1 or len({m.n_slow for m in spec.modes}) > 1:
        raise ValidationError(
            [Finding("NonConstantCounts", "slow/fast counts differ across modes; call augment() first")]
        )
    S = tuple(_frozen(build_permutation(m.fast_mask)) for m in spec.modes)
    A = tuple(_frozen(S[i] @ m.A @ S[i].T) for i, m in enumerate(spec.modes))
    jumps = {t: _frozen(S[t.target] @ spec.jumps[t.jump] @ S[t.source].T) for t in spec.transitions}
    m0 = spec.modes[0]
    return ReorderedSystem(
        epsilon=spec.epsilon,
        n_x=m0.n_slow,
        n_z=m0.n_fast,
        S=S,
        A=A,
        jumps=jumps,
        transitions=spec.transitions,
        spec=spec,
    )


def needs_augmentation(spec):
    return len({m.n_fast for m in spec.modes}) > 1 or len({m.n_slow for m in spec.modes}) > 1


def augment(spec, lam=None):
    """Pad every mode to a common slow/fast count with decaying artificial states.

    Artificial coordinates are appended after the original ones (slow ones
    first), flow as ``D dXbar/dt = -lam Xbar`` and are reset to zero at every
    event.  A spec whose counts are already constant is returned unchanged.

    Parameters
    ----------
    lam : float, optional
        Decay rate of the artificial coordinates; defaults to
        ``AUGMENT_RATE_FACTOR / epsilon``.
    """
    if not needs_augmentation(spec):
        return spec
    if lam is None:
        lam = AUGMENT_RATE_FACTOR / spec.epsilon
    if not lam > 0:
        raise ValueError("lam must be positive")
    nx = max(m.n_slow for m in spec.modes)
    nz = max(m.n_fast for m in spec.modes)
    n = nx + nz
    modes = []
    for m in spec.modes:
        extra = [False] * (nx - m.n_slow) + [True] * (nz - m.n_fast)
        A = np.zeros((n, n))
        A[: m.n, : m.n] = m.A
        k = np.arange(m.n, n)
        A[k, k] = -lam
        modes.append(Mode(A, tuple(m.fast_mask) + tuple(extra)))
    jumps = []
    for J in spec.jumps:
        Jb = np.zeros((n, n))
        Jb[: J.shape[0], : J.shape[1]] = J
        jumps.append(Jb)
    return HybridSystemSpec(
        epsilon=spec.epsilon,
        modes=tuple(modes),
        jumps=tuple(jumps),
        transitions=spec.transitions,
        augment=False,
        original_dims=tuple(m.n for m in spec.modes),
    )


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class EventSchedule:
    """Timed sequence of events.

    Interval ``k`` is ``[times[k], times[k+1])`` (the last one ends at
    ``horizon``) and runs mode ``modes[k]``.  For ``k >= 1`` the jump
    ``jumps[k]`` is applied at ``times[k]``; ``jumps[0]`` is ignored and
    stored as ``-1``.
    """

    times: np.ndarray
    modes: np.ndarray
    jumps: np.ndarray
    horizon: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        m = np.asarray(self.modes, dtype=np.intp)
        j = np.asarray(self.jumps, dtype=np.intp).copy()
        if not (t.ndim == 1 and t.size >= 1 and t.size == m.size == j.size):
            raise ScheduleIncompatibleError("times, modes and jumps must be equally long and nonempty")
        if t[0] != 0.0:
            raise ScheduleIncompatibleError("the first event must be at t=0")
        if np.any(np.diff(t) <= 0):
            raise ScheduleIncompatibleError("event times must be strictly increasing")
        if not float(self.horizon) > t[-1]:
            raise ScheduleIncompatibleError("horizon must exceed the last event time")
        j[0] = -1
        for name, a in (("times", t), ("modes", m), ("jumps", j)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "horizon", float(self.horizon))

    def __len__(self):
        return self.times.size

    @property
    def gaps(self):
        """Durations of all intervals, the last one truncated at the horizon."""
        return np.diff(np.append(self.times, self.horizon))

    @property
    def min_dwell(self):
        """Smallest gap between consecutive events (``inf`` with fewer than two)."""
        d = np.diff(self.times)
        return float(d.min()) if d.size else np.inf

    def triples(self):
        """The :class:`Transition` taken at each event ``k >= 1``."""
        return [Transition(int(self.modes[k - 1]), int(self.jumps[k]), int(self.modes[k])) for k in range(1, len(self))]

    def check_against(self, transitions, n_modes=None):
        allowed = set(transitions)
        if n_modes is not None and np.any((self.modes < 0) | (self.modes >= n_modes)):
            raise ScheduleIncompatibleError("schedule refers to a missing mode")
        for k, t in enumerate(self.triples(), start=1):
            if t not in allowed:
                raise ScheduleIncompatibleError(
                    f"event {k} at t={self.times[k]:.6g} uses undeclared transition "
                    f"({t.source},{t.jump},{t.target})"
                )
        return self


def _outgoing(transitions):
    out = {}
    for t in sorted(set(transitions)):
        out.setdefault(t.source, []).append(t)
    return out


def _walk(transitions, start_mode, count, choose):
    out = _outgoing(transitions)
    modes, jumps = [start_mode], [-1]
    cur = start_mode
    for k in range(1, count):
        options = out.get(cur)
        if not options:
            raise ScheduleIncompatibleError(f"mode {cur} has no outgoing transition")
        t = choose(cur, options)
        modes.append(t.target)
        jumps.append(t.jump)
        cur = t.target
    return modes, jumps


def _round_robin():
    counters = {}

    def choose(cur, options):
        c = counters.get(cur, 0)
        counters[cur] = c + 1
        return options[c % len(options)]

    return choose


def periodic_schedule(transitions, tau, horizon, start_mode=0):
    """Events every ``tau`` seconds; each mode cycles through its outgoing transitions."""
    tau = float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    count = int(np.ceil(horizon / tau))
    times = tau * np.arange(count)
    times = times[times < horizon]
    modes, jumps = _walk(transitions, start_mode, times.size, _round_robin())
    return EventSchedule(times, modes, jumps, horizon)


def explicit_schedule(times, modes, jumps, horizon, transitions=None):
    """Schedule from user-supplied lists; checked against ``transitions`` if given."""
    jumps = list(jumps)
    if len(jumps) == len(times) - 1:
        jumps = [-1] + jumps
    s = EventSchedule(times, modes, jumps, horizon)
    if transitions is not None:
        s.check_against(transitions)
    return s


def random_schedule(transitions, min_gap, max_gap, horizon, seed=None, start_mode=0):
    """Gaps uniform in ``[min_gap, max_gap]`` and uniformly chosen transitions.

    The dwell-time ``min_gap`` is respected by every gap between events.
    """
    if not (0 < min_gap <= max_gap):
        raise ValueError("need 0 < min_gap <= max_gap")
    rng = np.random.default_rng(seed)
    times = [0.0]
    while True:
        t = times[-1] + rng.uniform(min_gap, max_gap)
        # guard the dwell-time against rounding in the running sum
        if t - times[-1] < min_gap:
            t = np.nextafter(times[-1] + min_gap, np.inf)
        if t >= horizon:
            break
        times.append(t)

    def choose(cur, options):
        return options[rng.integers(len(options))]

    modes, jumps = _walk(transitions, start_mode, len(times), choose)
    return EventSchedule(np.array(times), modes, jumps, horizon)
