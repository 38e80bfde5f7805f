"""Python surface of the SelfPose3d desk-scale pipeline.

The heavy lifting lives in the `_core` pybind11 extension; this package
re-exports it so `import selfpose3d` works both from an installed wheel and
from a CMake build tree (where the extension sits on sys.path directly).
"""

try:
    from ._core import *  # noqa: F401,F403
    from . import _core as core  # noqa: F401
except ImportError:  # build-tree layout: _core.so next to the binaries
    from _core import *  # noqa: F401,F403
    import _core as core  # noqa: F401

__version__ = "0.1.0"
