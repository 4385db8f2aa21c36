"""Backend selection for the hot collision/nearest-neighbour kernels.

The compiled extension is preferred; set ``MNPLAN_PURE_PYTHON=1`` to force the
numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MNPLAN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

points_collide = _impl.points_collide
points_collide_mask = _impl.points_collide_mask
segment_collides = _impl.segment_collides
chains_collide = _impl.chains_collide
rects_collide = _impl.rects_collide
nearest = _impl.nearest
within_radius = _impl.within_radius
steer_collides = _impl.steer_collides
chain_joints = _pykernels.chain_joints


def backends():
    """Map of available backend name -> kernel module (for tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
