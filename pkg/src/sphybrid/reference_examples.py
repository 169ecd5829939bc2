"""The two-mode scalar examples with swapped slow/fast roles.

In mode 0 the first coordinate is slow and the second fast; in mode 1 the
roles are swapped.  Events alternate between the modes with an identity jump.
"""

import numpy as np

from .model import HybridSystemSpec, Mode, Transition

EXAMPLE_FLOWS = {
    1: (np.array([[-1.0, 0.5], [-1.0, -2.0]]), np.array([[-2.5, -2.0], [3.0, 1.0]])),
    2: (np.array([[-1.0, 0.5], [-3.0, -2.0]]), np.array([[-2.5, -4.0], [1.0, 0.5]])),
}
X0 = (2.0, 1.0)
EPSILON = 1e-3
# reference dwell-times for the example trajectories, with their expected outcome
SIMULATIONS = {
    1: ((6.16e-4, "Converging"), (2e-3, "Converging"), (0.2, "Converging")),
    2: ((0.16, "Diverging"), (0.406, "Converging")),
}
REFERENCE = {
    1: {"gamma11": np.sqrt(2 / 5), "lam_s": 1.25, "lam_f": 2.0, "tau_closed_form": 6.16e-4},
    2: {"gamma11": 2 * np.sqrt(3 / 5), "lam_s": 1.1, "lam_f": 2.0, "constant_part": 0.40, "tau_closed_form": 0.406},
}


def example_spec(example_id, epsilon=EPSILON):
    """Spec of example 1 or 2; raises ``KeyError`` for other ids."""
    A1, A2 = EXAMPLE_FLOWS[example_id]
    return HybridSystemSpec(
        epsilon=epsilon,
        modes=(Mode(A1, (False, True)), Mode(A2, (True, False))),
        jumps=(np.eye(2),),
        transitions=(Transition(0, 0, 1), Transition(1, 0, 0)),
    )
