"""Backend selection for the inner-loop kernels.

Imports the compiled _fastops extension when present, otherwise the
NumPy implementation. Set MCMKLR_BACKEND=python to force the fallback
(used by the equivalence tests and the kernel benchmark).
"""

import os

from . import _pyops

_forced = os.environ.get("MCMKLR_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _pyops
    BACKEND = "python"
else:
    try:
        from . import _fastops as _impl

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _pyops
        BACKEND = "python"

probs_and_logloss = _impl.probs_and_logloss
trial_logloss = _impl.trial_logloss
tau_sum = _impl.tau_sum
spectral_shifted_divide = _impl.spectral_shifted_divide
exp_vote = _impl.exp_vote
P_CLAMP = _impl.P_CLAMP


def available_backends():
    """Name -> module map of importable backends (for tests/benchmarks)."""
    out = {"python": _pyops}
    try:
        from . import _fastops

        out["cython"] = _fastops
    except ImportError:
        pass
    return out
