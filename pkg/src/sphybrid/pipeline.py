"""End-to-end analysis: validate, augment if needed, reorder, decouple, Lyapunov data."""

from dataclasses import dataclass

from . import certify as _certify
from . import decouple as _decouple
from . import model as _model
from .errors import LinalgError, SphybridError
from .tolerances import AUGMENT_RATE_FACTOR


@dataclass(frozen=True)
class Analysis:
    spec: object
    working: object
    reordered: object
    decoupled: object
    lyap: object
    a22: tuple
    augment_rate: float = None

    @property
    def augmented(self):
        return self.working is not self.spec


def augmentation_rate(spec):
    """Decay rate for artificial coordinates.

    ``AUGMENT_RATE_FACTOR`` times the fastest per-mode Lyapunov rate of the
    original modes, each decoupled on its own; ``AUGMENT_RATE_FACTOR / eps``
    if some mode cannot be analysed.
    """
    rates = []
    try:
        for m in spec.modes:
            S = _model.build_permutation(m.fast_mask)
            mb = _decouple.decouple_mode(S @ m.A @ S.T, m.n_slow)
            rates.append(_certify.block_lyapunov(mb.A0)[1])
            rates.append(_certify.block_lyapunov(mb.A22)[1])
    except (SphybridError, ValueError, LinalgError):
        return AUGMENT_RATE_FACTOR / spec.epsilon
    return AUGMENT_RATE_FACTOR * max(rates)


def prepare(spec, augment_rate=None):
    """Validate, augment and reorder; returns ``(working_spec, reordered, rate)``."""
    _model.check(spec)
    rate = None
    working = spec
    if _model.needs_augmentation(spec):
        rate = augmentation_rate(spec) if augment_rate is None else augment_rate
        working = _model.augment(spec, rate)
    return working, _model.reorder(working), rate


def analyze(spec, method="lyapunov", kappa=None, overrides=None, strict_b3=False, augment_rate=None):
    """Run the full analysis chain on a :class:`~sphybrid.model.HybridSystemSpec`."""
    working, reordered, rate = prepare(spec, augment_rate)
    a22 = tuple(_decouple.check_A22(reordered))
    dec = _decouple.build_decoupled(reordered)
    kw = {} if kappa is None else {"kappa": kappa}
    lyap = _certify.lyapunov_data(dec, method=method, overrides=overrides, strict_b3=strict_b3, **kw)
    return Analysis(spec, working, reordered, dec, lyap, a22, rate)
