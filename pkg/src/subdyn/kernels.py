"""Backend selection for the enumeration kernels.

The compiled extension is preferred when importable; the numpy fallback is
contract- and bit-identical.  Set SUBDYN_KERNELS=numpy to force the
fallback (used by the cross-backend tests and the benchmark).
"""

from __future__ import annotations

import os

from subdyn import _kernels_np

if os.environ.get("SUBDYN_KERNELS", "").lower() in {"numpy", "py", "python"}:
    _impl = _kernels_np
else:
    try:
        from subdyn import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

backend_name: str = _impl.BACKEND_NAME

popcount_table = _impl.popcount_table
subset_sums = _impl.subset_sums
dr_min_mask = _impl.dr_min_mask
submodular_min_margin = _impl.submodular_min_margin
lipschitz_modulus = _impl.lipschitz_modulus
