"""Hot-kernel backend selection.

The sparse MTTKRP and the sparse model inner product dominate solver runtime,
so they ship in two implementations: numba-jitted (default) and pure numpy.
Selection is controlled by the ``CPSALS_BACKEND`` environment variable:

* ``auto`` (default): numba if importable, else numpy;
* ``numba``: require numba, raise if unavailable;
* ``numpy``: force the pure-numpy fallback.

``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

_CHOICES = ("auto", "numba", "numpy")
_requested = os.environ.get("CPSALS_BACKEND", "auto").strip().lower()
if _requested not in _CHOICES:
    raise RuntimeError(
        f"CPSALS_BACKEND={_requested!r} not recognized; choose from {_CHOICES}"
    )

if _requested == "numpy":
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"

mttkrp_coo = _impl.mttkrp_coo
kruskal_inner_coo = _impl.kruskal_inner_coo
linear_to_multi = _impl.linear_to_multi
