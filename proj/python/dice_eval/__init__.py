"""Reference-free evaluation for instruction-based image editing."""

try:
    from ._dice import *  # noqa: F401,F403  (installed layout)
except ImportError:
    from _dice import *  # noqa: F401,F403  (in-tree build, module on PYTHONPATH)

__version__ = "1.0.0"
