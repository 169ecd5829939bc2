"""Stability constants and dwell-time certificates.

The certificate is built from per-mode quadratic Lyapunov functions of the
decoupled blocks.  Between events the pair ``(W_s, W_f)`` of slow and fast
Lyapunov magnitudes is bounded by ``M_tau`` and across an event by ``Gamma``,
so the system is stable under every schedule with dwell-time ``tau`` as soon
as the nonnegative matrix ``Gamma @ M_tau`` is Schur.

Two bounds are produced:

* ``tau_bisection``: the smallest ``tau`` for which ``Gamma @ M_tau`` is
  Schur, found by bisection (its spectral radius is non-increasing in tau);
* ``tau_closed_form``: an explicit bound from a positive witness
  ``p = (1, a*eps)`` or ``p = (1, a)`` with ``(Gamma M_tau)^T p < p``, with the
  free scalar ``a`` tuned by golden-section search.
"""

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linalg
from .errors import (
    EpsilonAboveThresholdError,
    EpsilonOutOfRangeError,
    InfeasibleError,
    NoFeasibleAError,
    NotHurwitzError,
    NotScalarTwoModeError,
    SuppliedDataInvalid,
)
from .tolerances import (
    A_SEARCH_MARGIN,
    BISECTION_RTOL,
    EPS2_FRACTION,
    GAMMA_ONE_BAND,
    GAMMA_ZERO,
    GOLDEN_ITERS,
    HURWITZ_MARGIN,
    KAPPA,
    LYAPUNOV_INEQUALITY_TOL,
    Q_MIN_EIG_TOL,
    SCHUR_MARGIN,
    WITNESS_STEP,
)

NORMALITY_RTOL = 1e-12


class CaseLabel(str, enum.Enum):
    """Which closed-form bound applies, by the value of ``gamma11``."""

    GT1 = "GT1"
    EQ1_G12NZ = "EQ1_G12NZ"
    EQ1_G12Z = "EQ1_G12Z"
    LT1 = "LT1"
    LT1_NODWELL = "LT1_NODWELL"

    def __str__(self):
        return self.value


# ------------------------------------------------------------ mode Lyapunov


@dataclass(frozen=True)
class ModeLyapunov:
    """Quadratic Lyapunov data of one mode.

    ``A0^T Qs + Qs A0 <= -2 lam_s Qs`` and ``A22^T Qf + Qf A22 <= -2 lam_f Qf``
    with ``Qs >= I`` and ``Qf >= I``.
    """

    Qs: np.ndarray
    lam_s: float
    Qf: np.ndarray
    lam_f: float


def _is_normal(A):
    scale = max(float(np.linalg.norm(A, 2)) ** 2, 1e-300)
    return np.linalg.norm(A @ A.T - A.T @ A, 2) <= NORMALITY_RTOL * scale


def block_lyapunov(A, kappa=KAPPA):
    """Return ``(Q, lam)`` with ``A^T Q + Q A <= -2 lam Q`` and ``min eig Q = 1``.

    Normal matrices (scalars included) get ``Q = I`` with the exact rate
    ``lam = |spectral abscissa|``.  Otherwise ``lam = kappa * |abscissa|``
    and ``Q`` solves ``(A + lam I)^T Q + Q (A + lam I) = -I``, rescaled.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    alpha = linalg.spectral_abscissa(A)
    if not alpha < -HURWITZ_MARGIN:
        raise NotHurwitzError(f"matrix with spectral abscissa {alpha:.6g} is not Hurwitz")
    n = A.shape[0]
    if _is_normal(A):
        return np.eye(n), -alpha
    lam = -kappa * alpha
    Q = linalg.solve_lyapunov(A + lam * np.eye(n), np.eye(n))
    Q = Q / linalg.min_eig_sym(Q)
    return 0.5 * (Q + Q.T), lam


def lyapunov_gap(A, Q, lam):
    """Smallest eigenvalue of ``-(A^T Q + Q A + 2 lam Q)``; nonnegative when the decay holds."""
    S = A.T @ Q + Q @ A + 2.0 * lam * Q
    return float(np.linalg.eigvalsh(-0.5 * (S + S.T))[0])


def verify_mode_lyapunov(A0, A22, ml, mode=None):
    """Raise :class:`SuppliedDataInvalid` unless ``ml`` satisfies both decay inequalities."""
    where = "" if mode is None else f" for mode {mode}"
    for name, A, Q, lam in (("slow", A0, ml.Qs, ml.lam_s), ("fast", A22, ml.Qf, ml.lam_f)):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape != A.shape:
            raise SuppliedDataInvalid(f"{name} Q{where} has shape {Q.shape}, expected {A.shape}")
        if not lam > 0:
            raise SuppliedDataInvalid(f"{name} rate{where} must be positive, got {lam}")
        try:
            m = linalg.min_eig_sym(Q)
        except linalg.NotSymmetricError as exc:
            raise SuppliedDataInvalid(f"{name} Q{where} is not symmetric") from exc
        if m < 1.0 - Q_MIN_EIG_TOL:
            raise SuppliedDataInvalid(f"{name} Q{where} must satisfy Q >= I (min eigenvalue {m:.6g})")
        gap = lyapunov_gap(A, Q, lam)
        if gap < -LYAPUNOV_INEQUALITY_TOL:
            raise SuppliedDataInvalid(
                f"{name} Lyapunov inequality fails{where}: min eigenvalue {gap:.3g} of -(A^T Q + Q A + 2 lam Q)"
            )


def mode_lyapunov(decoupled, kappa=KAPPA, overrides=None):
    """Per-mode Lyapunov data for every mode.

    Parameters
    ----------
    overrides : dict, optional
        ``mode index -> ModeLyapunov`` supplied by the user; verified rather
        than computed.

    Raises
    ------
    NotHurwitzError
        If some ``A0^i`` or ``A22^i`` is not Hurwitz (``err.mode``, ``err.block``).
    SuppliedDataInvalid
        If an override violates ``Q >= I`` or its decay inequality.
    """
    overrides = overrides or {}
    out = []
    for i, mb in enumerate(decoupled.modes):
        for block, A in (("A0", mb.A0), ("A22", mb.A22)):
            if not linalg.is_hurwitz(A):
                raise NotHurwitzError(
                    f"block {block} of mode {i} is not Hurwitz "
                    f"(spectral abscissa {linalg.spectral_abscissa(A):.6g})",
                    mode=i,
                    block=block,
                )
        if i in overrides:
            ml = overrides[i]
            ml = ModeLyapunov(
                np.atleast_2d(np.asarray(ml.Qs, dtype=float)), float(ml.lam_s),
                np.atleast_2d(np.asarray(ml.Qf, dtype=float)), float(ml.lam_f),
            )
            verify_mode_lyapunov(mb.A0, mb.A22, ml, mode=i)
        else:
            Qs, lam_s = block_lyapunov(mb.A0, kappa)
            Qf, lam_f = block_lyapunov(mb.A22, kappa)
            ml = ModeLyapunov(Qs, lam_s, Qf, lam_f)
        out.append(ml)
    return out


@dataclass(frozen=True)
class ScalarQ:
    q: float
    gamma11: float
    Qs: tuple


def scalar_optimal_q(decoupled):
    """Slow weights minimising ``gamma11`` for a two-mode system with scalar blocks.

    With ``r12 = |R11| from mode 0 to 1`` and ``r21 = |R11| from 1 to 0`` and
    slow weights ``Qs^1 / Qs^0 = q^2``, the slow jump gain is
    ``max(q r12, r21 / q)``, minimised by ``q = sqrt(r21 / r12)`` where it equals
    ``sqrt(r12 r21)``.  The weights are normalised so the smaller one is 1.
    """
    if decoupled.n_modes != 2 or decoupled.n_x != 1 or decoupled.n_z != 1:
        raise NotScalarTwoModeError("optimal scalar q needs two modes with one slow and one fast coordinate")
    cross = {(0, 1): [], (1, 0): []}
    for t, r in decoupled.R.items():
        if (t.source, t.target) in cross:
            cross[(t.source, t.target)].append(abs(float(r.R11[0, 0])))
    if not cross[(0, 1)] or not cross[(1, 0)]:
        raise NotScalarTwoModeError("transitions in both directions between the two modes are required")
    r12, r21 = max(cross[(0, 1)]), max(cross[(1, 0)])
    if r12 == 0.0 or r21 == 0.0:
        raise NotScalarTwoModeError("a slow jump gain vanishes; the optimal q is unbounded")
    q = math.sqrt(r21 / r12)
    Qs = (1.0, q * q) if q >= 1.0 else (1.0 / (q * q), 1.0)
    return ScalarQ(q=q, gamma11=math.sqrt(r12 * r21), Qs=Qs)


# ------------------------------------------------------------ constants


def _weighted_norm(Q_left, M, Q_right):
    return linalg.spectral_norm(linalg.principal_sqrt(Q_left) @ M @ linalg.inv_sqrt(Q_right))


def coupling_constants(decoupled, mls, strict_b3=False):
    """Per-mode and aggregated coupling constants ``b1, b2, b3``.

    ``b1 = ||Qs^{1/2} B1 Qf^{-1/2}||``, ``b2 = ||Qf^{1/2} B2 Qs^{-1/2}||`` and
    ``b3 = ||Qf^{1/2} B3 Qf^{-1/2}||``; with ``strict_b3`` an extra ``Qf`` is
    inserted, ``||Qf^{1/2} Qf B3 Qf^{-1/2}||``.

    Returns
    -------
    dict
        ``b1, b2, b3`` (maxima over modes) and ``per_mode``: list of triples.
    """
    per_mode = []
    for mb, ml in zip(decoupled.modes, mls):
        b1 = _weighted_norm(ml.Qs, mb.B1, ml.Qf)
        b2 = _weighted_norm(ml.Qf, mb.B2, ml.Qs)
        B3 = ml.Qf @ mb.B3 if strict_b3 else mb.B3
        b3 = _weighted_norm(ml.Qf, B3, ml.Qf)
        per_mode.append((b1, b2, b3))
    arr = np.array(per_mode)
    return {"b1": float(arr[:, 0].max()), "b2": float(arr[:, 1].max()), "b3": float(arr[:, 2].max()), "per_mode": per_mode}


def epsilon_thresholds(lam_s, lam_f, b1, b2, b3):
    """Return ``(eps1, eps2)``.

    ``eps1 = lam_f / ((b1 + b2)^2 / (4 lam_s) + b3)`` (``inf`` when the
    denominator vanishes) and ``eps2 = min(eps1, EPS2_FRACTION * lam_f / lam_s)``.
    """
    den = (b1 + b2) ** 2 / (4.0 * lam_s) + b3
    eps1 = math.inf if den == 0.0 else lam_f / den
    return eps1, min(eps1, EPS2_FRACTION * lam_f / lam_s)


def beta_constants(lam_s, lam_f, b1, b2, b3, eps2):
    """``beta1 = sqrt(b2^2 + b3^2) / lam_f``, ``beta2 = b1 / (lam_f - eps2 lam_s)``, ``beta3 = b1 beta1 / lam_s``."""
    beta1 = math.hypot(b2, b3) / lam_f
    beta2 = b1 / (lam_f - eps2 * lam_s)
    beta3 = b1 * beta1 / lam_s
    return beta1, beta2, beta3


def gammas(decoupled, mls, transitions=None):
    """Jump gains ``gamma11, gamma12, gamma21, gamma22`` over the declared transitions.

    Returns
    -------
    dict
        The four gains and ``Gamma = [[g11, g12], [g21, g22]]``.
    """
    transitions = decoupled.transitions if transitions is None else transitions
    g = np.zeros((2, 2))
    for t in transitions:
        r = decoupled.R[t]
        src, dst = mls[t.source], mls[t.target]
        vals = (
            _weighted_norm(dst.Qs, r.R11, src.Qs),
            _weighted_norm(dst.Qs, r.R12, src.Qf),
            _weighted_norm(dst.Qf, r.R21, src.Qs),
            _weighted_norm(dst.Qf, r.R22, src.Qf),
        )
        g = np.maximum(g, np.array(vals).reshape(2, 2))
    return {"gamma11": g[0, 0], "gamma12": g[0, 1], "gamma21": g[1, 0], "gamma22": g[1, 1], "Gamma": g}


def delta_constants(g11, g12, g21, g22, beta1, beta2, beta3):
    return (
        g11 * beta3 + g12 * beta1,
        g11 * (beta2 + beta3) + g12 * beta1,
        g21 * beta3 + g22 * beta1,
        g21 * (beta2 + beta3) + g22 * beta1,
    )


@dataclass(frozen=True)
class LyapunovData:
    """Everything the certificates need; independent of epsilon."""

    modes: tuple
    lam_s: float
    lam_f: float
    b1: float
    b2: float
    b3: float
    b_per_mode: tuple
    eps1: float
    eps2: float
    beta1: float
    beta2: float
    beta3: float
    gamma11: float
    gamma12: float
    gamma21: float
    gamma22: float
    delta1: float
    delta2: float
    delta3: float
    delta4: float
    method: str = "lyapunov"
    strict_b3: bool = False
    q: float = None

    @property
    def Gamma(self):
        return np.array([[self.gamma11, self.gamma12], [self.gamma21, self.gamma22]])

    @property
    def Qs(self):
        return tuple(m.Qs for m in self.modes)

    @property
    def Qf(self):
        return tuple(m.Qf for m in self.modes)

    def constants(self):
        """Scalar constants as a flat dict (for reports)."""
        keys = (
            "lam_s lam_f b1 b2 b3 eps1 eps2 beta1 beta2 beta3 "
            "gamma11 gamma12 gamma21 gamma22 delta1 delta2 delta3 delta4"
        ).split()
        d = {k: float(getattr(self, k)) for k in keys}
        d["method"] = self.method
        d["strict_b3"] = self.strict_b3
        if self.q is not None:
            d["q"] = float(self.q)
        return d


def lyapunov_data(decoupled, method="lyapunov", kappa=KAPPA, overrides=None, strict_b3=False):
    """Assemble :class:`LyapunovData` for a decoupled system.

    Parameters
    ----------
    method : {"lyapunov", "scalar_optimal_q"}
        ``"scalar_optimal_q"`` keeps the computed rates but replaces the slow
        weights with the gamma11-minimising scalars (two scalar modes only).
    """
    mls = mode_lyapunov(decoupled, kappa=kappa, overrides=overrides)
    q = None
    if method == "scalar_optimal_q":
        sq = scalar_optimal_q(decoupled)
        q = sq.q
        mls = [ModeLyapunov(np.array([[s]]), m.lam_s, m.Qf, m.lam_f) for s, m in zip(sq.Qs, mls)]
        for i, (mb, ml) in enumerate(zip(decoupled.modes, mls)):
            verify_mode_lyapunov(mb.A0, mb.A22, ml, mode=i)
    elif method != "lyapunov":
        raise ValueError(f"unknown Lyapunov method {method!r}")
    lam_s = min(m.lam_s for m in mls)
    lam_f = min(m.lam_f for m in mls)
    b = coupling_constants(decoupled, mls, strict_b3=strict_b3)
    eps1, eps2 = epsilon_thresholds(lam_s, lam_f, b["b1"], b["b2"], b["b3"])
    beta1, beta2, beta3 = beta_constants(lam_s, lam_f, b["b1"], b["b2"], b["b3"], eps2)
    g = gammas(decoupled, mls)
    d = delta_constants(g["gamma11"], g["gamma12"], g["gamma21"], g["gamma22"], beta1, beta2, beta3)
    return LyapunovData(
        modes=tuple(mls),
        lam_s=lam_s,
        lam_f=lam_f,
        b1=b["b1"],
        b2=b["b2"],
        b3=b["b3"],
        b_per_mode=tuple(b["per_mode"]),
        eps1=eps1,
        eps2=eps2,
        beta1=beta1,
        beta2=beta2,
        beta3=beta3,
        gamma11=float(g["gamma11"]),
        gamma12=float(g["gamma12"]),
        gamma21=float(g["gamma21"]),
        gamma22=float(g["gamma22"]),
        delta1=d[0],
        delta2=d[1],
        delta3=d[2],
        delta4=d[3],
        method=method,
        strict_b3=strict_b3,
        q=q,
    )


def _check_eps(lyap, eps):
    if not (eps > 0 and eps <= lyap.eps2 * (1 + 1e-12)):
        raise EpsilonOutOfRangeError(f"epsilon={eps:.6g} must lie in (0, eps2={lyap.eps2:.6g}]")


def betas(lyap, eps):
    """``(beta1, beta2, beta3)``, after checking ``0 < eps <= eps2``."""
    _check_eps(lyap, eps)
    return lyap.beta1, lyap.beta2, lyap.beta3


# ------------------------------------------------------------ M_tau and bisection


def build_M_tau(lyap, eps, tau):
    """Inter-event gain matrix ``M_tau`` (``tau = inf`` gives the limit)."""
    _check_eps(lyap, eps)
    if not tau >= 0:
        raise ValueError("tau must be nonnegative")
    es = math.exp(-lyap.lam_s * tau)
    ef = math.exp(-lyap.lam_f * tau / eps)
    b1, b2, b3 = lyap.beta1, lyap.beta2, lyap.beta3
    return np.array([[es + eps * b3, eps * (b2 + b3)], [eps * b1, ef + eps * b1]])


def gamma_M(lyap, eps, tau):
    return lyap.Gamma @ build_M_tau(lyap, eps, tau)


def schur_radius(lyap, eps, tau):
    return linalg.spectral_radius(gamma_M(lyap, eps, tau))


def min_dwell_bisection(lyap, eps):
    """Smallest ``tau >= 0`` with ``Gamma @ M_tau`` Schur.

    Returns the upper end of the final bracket, so the returned value is
    itself certified.

    Raises
    ------
    InfeasibleError
        If ``Gamma @ M_tau`` is not Schur even in the limit ``tau -> inf``.
    """
    level = 1.0 - SCHUR_MARGIN

    def ok(tau):
        return schur_radius(lyap, eps, tau) < level

    if ok(0.0):
        return 0.0
    if not ok(math.inf):
        rho = schur_radius(lyap, eps, math.inf)
        raise InfeasibleError(
            f"Gamma M_tau stays non-Schur as tau -> inf (spectral radius {rho:.6g}) at epsilon={eps:.6g}"
        )
    lo, hi = 0.0, min(eps / lyap.lam_f, 1.0 / lyap.lam_s)
    while not ok(hi):
        lo, hi = hi, 2.0 * hi
    for _ in range(400):
        if hi - lo <= BISECTION_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def reduced_order_certificate(lyap):
    """Dwell-time of the slow-only model: ``ln(gamma11) / lam_s`` when ``gamma11 > 1``, else 0."""
    return math.log(lyap.gamma11) / lyap.lam_s if lyap.gamma11 > 1.0 else 0.0


# ------------------------------------------------------------ closed form


def _golden_min(f, lo, hi, iters=GOLDEN_ITERS):
    """Golden-section minimiser of a unimodal ``f`` on ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _div(num, den):
    if den == 0.0:
        return math.inf if num > 0 else (-math.inf if num < 0 else math.nan)
    return num / den


def _log_ratio(num, den):
    """``ln(num / den)`` for ``den > 0``; ``-inf`` when ``num == 0``."""
    if num <= 0.0:
        return -math.inf
    return math.log(num) - math.log(den)


def _search_in(lo, hi, f):
    """Minimise ``f(a)`` over ``lo < a < hi`` in the variable ``u = ln(a - lo)``.

    An infinite ``hi`` is capped far away.  Both ends are pulled inside by
    ``A_SEARCH_MARGIN`` (the lower one relative to ``|lo|``): at an end one of
    the witness inequalities holds with equality, which rounding can break.
    """
    width = hi - lo
    if not math.isfinite(width):
        width = 1e12 * max(1.0, abs(lo))
    width *= 1.0 - A_SEARCH_MARGIN
    u_hi = math.log(width)
    u_lo = min(math.log(A_SEARCH_MARGIN * abs(lo)) if lo != 0.0 else -math.inf, u_hi - math.log(2.0))
    u_lo = max(u_lo, u_hi + math.log(1e-15))
    u, val = _golden_min(lambda u: f(lo + math.exp(u)), u_lo, u_hi)
    return lo + math.exp(u), val


@dataclass
class DwellTimeCertificate:
    """Outcome of certification at one epsilon.

    ``tau_closed_form`` is an infimum: the certificate covers every dwell-time
    strictly greater than it.  ``tau_closed_form`` and ``a_param`` are
    ``None`` when the closed form does not apply at this epsilon
    (``closed_form_error`` then says why).
    """

    epsilon: float
    case: CaseLabel
    epsilon_star: float
    tau_closed_form: float
    tau_bisection: float
    reduced_order_tau: float
    a_param: float = None
    witness: tuple = None
    eta: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    constant_part: float = None
    closed_form_error: str = None
    constants: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["case"] = str(self.case)
        return _jsonable(d)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["case"] = CaseLabel(d["case"])
        if d.get("witness") is not None:
            d["witness"] = tuple(d["witness"])
        return cls(**{k: _unjson(v) for k, v in d.items()})


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, enum.Enum):
        return x.value
    return x


def _unjson(x):
    if isinstance(x, dict):
        return {k: _unjson(v) for k, v in x.items()}
    if x in ("inf", "-inf", "nan"):
        return float(x)
    return x


def classify_case(lyap):
    g11, g12 = lyap.gamma11, lyap.gamma12
    if abs(g11 - 1.0) <= GAMMA_ONE_BAND:
        return CaseLabel.EQ1_G12Z if g12 <= GAMMA_ZERO else CaseLabel.EQ1_G12NZ
    if g11 > 1.0:
        return CaseLabel.GT1
    if lyap.gamma22 < 1.0 and g12 * lyap.gamma21 < (1.0 - g11) * (1.0 - lyap.gamma22):
        return CaseLabel.LT1_NODWELL
    return CaseLabel.LT1


# Each case is described by (a_lo(eps), a_hi(eps)) bounds on the witness
# parameter and the bound tau(a, eps).


def _scaled_bounds(L, eps):
    """``a`` interval for the witness ``p = (1, a*eps)``."""
    if 1.0 - eps * L.delta4 <= 0.0 or 1.0 - eps * L.delta1 <= 0.0:
        return math.nan, math.nan
    lo = L.delta2 / (1.0 - eps * L.delta4)
    hi = _div(1.0 - eps * L.delta1, eps * eps * L.delta3)
    return lo, hi


def _scaled_terms(L, eps, a):
    """The two lower bounds on tau for ``p = (1, a*eps)``."""
    g11, g12, g21, g22 = L.gamma11, L.gamma12, L.gamma21, L.gamma22
    den1 = 1.0 - eps * L.delta1 - a * eps * eps * L.delta3
    den2 = a - L.delta2 - a * eps * L.delta4
    if den1 <= 0.0 or den2 <= 0.0:
        return math.inf, math.inf
    t1 = _log_ratio(g11 + a * eps * g21, den1) / L.lam_s
    t2 = eps / L.lam_f * (_log_ratio(g12 + a * eps * g22, den2) - math.log(eps))
    return t1, t2


def _plain_bounds(L, eps):
    """``a`` interval for ``p = (1, a)`` with the slow inequality holding at tau = 0."""
    if 1.0 - eps * L.delta4 <= 0.0:
        return math.nan, math.nan
    lo = eps * L.delta2 / (1.0 - eps * L.delta4)
    hi = _div(1.0 - L.gamma11 - eps * L.delta1, L.gamma21 + eps * L.delta3)
    return lo, hi


def _plain_eta4(L, eps, a):
    den = a - eps * L.delta2 - a * eps * L.delta4
    if den <= 0.0:
        return math.inf
    return eps / L.lam_f * _log_ratio(L.gamma12 + a * L.gamma22, den)


def _nodwell_bounds(L, eps):
    """``a`` interval on which ``p = (1, a)`` works already at tau = 0."""
    den = 1.0 - L.gamma22 - eps * L.delta4
    if den <= 0.0:
        return math.nan, math.nan
    lo = (L.gamma12 + eps * L.delta2) / den
    hi = _div(1.0 - L.gamma11 - eps * L.delta1, L.gamma21 + eps * L.delta3)
    return lo, hi


def _nonempty(bounds):
    lo, hi = bounds
    return lo == lo and hi == hi and lo >= 0.0 and hi > lo


def validity_threshold(lyap, case):
    """Largest ``eps* <= eps2`` below which the case's witness interval is nonempty."""
    bounds = {
        CaseLabel.GT1: _scaled_bounds,
        CaseLabel.EQ1_G12NZ: _scaled_bounds,
        CaseLabel.EQ1_G12Z: _scaled_bounds,
        CaseLabel.LT1: _plain_bounds,
        CaseLabel.LT1_NODWELL: _nodwell_bounds,
    }[case]

    def ok(e):
        return _nonempty(bounds(lyap, e))

    top = lyap.eps2
    if ok(top):
        return top
    lo, hi = 0.0, top
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def witness_thresholds(L, a, case):
    """Per-``a`` epsilon bounds reported alongside the certificate."""
    g11, g12, g21, g22 = L.gamma11, L.gamma12, L.gamma21, L.gamma22
    d1, d2, d3, d4 = L.delta1, L.delta2, L.delta3, L.delta4
    out = {"eps2": L.eps2}
    if case in (CaseLabel.GT1, CaseLabel.EQ1_G12NZ, CaseLabel.EQ1_G12Z):
        if a * d3 > 0:
            out["eps3"] = 2.0 / (d1 + math.sqrt(d1 * d1 + 4.0 * a * d3))
        else:
            out["eps3"] = _div(1.0, d1)
        out["eps5"] = _div(a - d2, a * d4)
    else:
        out["eps6"] = _div(1.0 - g11 - a * g21, a * d3 + d1)
        out["eps7_printed"] = _div(a, a * d3 + d1)
        out["eps7"] = _div(a, d2 + a * d4)
        if case is CaseLabel.LT1_NODWELL:
            out["eps8"] = _div(a - g12 - a * g22, d2 + a * d4)
    return out


def _verify_witness(lyap, eps, tau, p):
    t = tau + WITNESS_STEP
    GM = gamma_M(lyap, eps, t)
    p = np.asarray(p, dtype=float)
    ok_p = bool(np.all(p > 0) and np.all(GM.T @ p < p))
    ok_s, _ = linalg.is_schur_positive(GM)
    return ok_p and ok_s


def closed_form_bound(lyap, eps, case=None):
    """Closed-form dwell-time bound for one epsilon.

    Returns
    -------
    dict
        ``case, tau, a, witness, eta, thresholds, epsilon_star`` and
        ``constant_part`` (GT1 only).

    Raises
    ------
    EpsilonAboveThresholdError
        If the witness interval is empty at this epsilon.
    NoFeasibleAError
        If the a-search fails to produce a verified witness.
    """
    L = lyap
    _check_eps(L, eps)
    case = classify_case(L) if case is None else case

    if case is CaseLabel.LT1_NODWELL:
        star = validity_threshold(L, case)
        lo_g = L.gamma12 / (1.0 - L.gamma22)
        hi_g = _div(1.0 - L.gamma11, L.gamma21)

        def neg_margin(a):
            th = witness_thresholds(L, a, case)
            return -min(th["eps6"], th["eps8"])

        a, _ = _search_in(lo_g, hi_g, neg_margin) if hi_g > lo_g else (math.nan, 0)
        lo, hi = _nodwell_bounds(L, eps)
        if a == a and lo < a < hi:
            p = (1.0, a)
            if _verify_witness(L, eps, 0.0, p):
                return dict(
                    case=case, tau=0.0, a=a, witness=p, eta={},
                    thresholds=witness_thresholds(L, a, case), epsilon_star=star, constant_part=None,
                )
        # epsilon too large for the no-dwell witness: use the O(eps) bound
        case = CaseLabel.LT1

    star = validity_threshold(L, case)
    if case is CaseLabel.LT1:
        lo, hi = _plain_bounds(L, eps)
        if not _nonempty((lo, hi)):
            raise EpsilonAboveThresholdError(eps, star, str(case))
        a, _ = _search_in(lo, hi, lambda a: _plain_eta4(L, eps, a))
        eta4 = _plain_eta4(L, eps, a)
        tau = max(0.0, eta4)
        p = (1.0, a)
        eta = {"eta4": eta4}
        constant_part = None
    else:
        lo, hi = _scaled_bounds(L, eps)
        if not _nonempty((lo, hi)):
            raise EpsilonAboveThresholdError(eps, star, str(case))

        def obj(a):
            return max(_scaled_terms(L, eps, a))

        a, _ = _search_in(lo, hi, obj)
        t1, t2 = _scaled_terms(L, eps, a)
        tau = max(0.0, t1, t2)
        p = (1.0, a * eps)
        constant_part = math.log(L.gamma11) / L.lam_s
        eta1 = t1 - constant_part
        if case is CaseLabel.GT1:
            eta = {"eta1": eta1, "fast_term": t2}
        elif case is CaseLabel.EQ1_G12NZ:
            eta = {"eta1": eta1, "eta2": t2 + eps / L.lam_f * math.log(eps)}
        else:
            eta = {"eta1": eta1, "eta3": max(eta1, t2)}
        if case is not CaseLabel.GT1:
            constant_part = None
    if not (math.isfinite(tau) and _verify_witness(L, eps, tau, p)):
        raise NoFeasibleAError(f"no verified witness found for case {case} at epsilon={eps:.6g}")
    return dict(
        case=case, tau=tau, a=a, witness=p, eta=eta,
        thresholds=witness_thresholds(L, a, case), epsilon_star=star, constant_part=constant_part,
    )


def closed_form_certificate(lyap, eps):
    """Full certificate with closed-form, bisection and reduced-order bounds.

    Raises
    ------
    EpsilonAboveThresholdError, NoFeasibleAError
        When the closed form does not apply (see :func:`certify` for a
        non-raising variant).
    InfeasibleError
        When not even the bisection bound exists.
    """
    cf = closed_form_bound(lyap, eps)
    tau_b = min_dwell_bisection(lyap, eps)
    return DwellTimeCertificate(
        epsilon=eps,
        case=cf["case"],
        epsilon_star=cf["epsilon_star"],
        tau_closed_form=cf["tau"],
        tau_bisection=tau_b,
        reduced_order_tau=reduced_order_certificate(lyap),
        a_param=cf["a"],
        witness=tuple(cf["witness"]),
        eta=cf["eta"],
        thresholds=cf["thresholds"],
        constant_part=cf["constant_part"],
        constants=lyap.constants(),
    )


def certify(lyap, eps):
    """Like :func:`closed_form_certificate` but records closed-form failures instead of raising.

    Raises
    ------
    InfeasibleError
        If ``Gamma @ M_tau`` is never Schur at this epsilon.
    """
    try:
        return closed_form_certificate(lyap, eps)
    except (EpsilonAboveThresholdError, NoFeasibleAError) as exc:
        case = classify_case(lyap)
        tau_b = min_dwell_bisection(lyap, eps)
        return DwellTimeCertificate(
            epsilon=eps,
            case=case,
            epsilon_star=validity_threshold(lyap, case),
            tau_closed_form=None,
            tau_bisection=tau_b,
            reduced_order_tau=reduced_order_certificate(lyap),
            closed_form_error=str(exc),
            constants=lyap.constants(),
        )
