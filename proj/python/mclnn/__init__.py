"""Masked conditional neural networks for sound classification."""

try:
    from ._mclnn import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:  # pragma: no cover - in-tree builds put the module on sys.path
    from _mclnn import *  # noqa: F401,F403

from ._version import __version__  # noqa: F401
