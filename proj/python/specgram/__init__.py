"""Spectral statistics of masked random Gram matrices with variance profiles.

The heavy lifting lives in the compiled module ``_specgram``; this package
re-exports its contents.  Installed wheels ship the module inside the
package; the in-tree test harness puts it next to the package instead.
"""

try:
    from ._specgram import *  # noqa: F401,F403
    from . import _specgram as _impl
except ImportError:  # in-tree layout: compiled module on sys.path
    from _specgram import *  # type: ignore  # noqa: F401,F403
    import _specgram as _impl

__version__ = "0.1.0"
__all__ = [name for name in dir(_impl) if not name.startswith("_")]
