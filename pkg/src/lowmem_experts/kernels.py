"""Kernel backend selection.

The compiled ``_core`` extension is used when it is importable; otherwise the
pure-Python ``_core_py`` twin is used. Set ``LOWMEM_EXPERTS_BACKEND=python``
to force the fallback.
"""

import os

if os.environ.get("LOWMEM_EXPERTS_BACKEND", "").lower() == "python":
    from . import _core_py as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        from . import _core_py as _impl

BACKEND = _impl.BACKEND
IntervalCore = _impl.IntervalCore
sample_index = _impl.sample_index
mwu_weights = _impl.mwu_weights
mwu_probs = _impl.mwu_probs
mwu_sample = _impl.mwu_sample
squint_logweight = _impl.squint_logweight
