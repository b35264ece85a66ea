"""Python face of the compressed-sensing MRI reconstruction laboratory.

Everything heavy lives in the compiled extension; this package just
re-exports it under a stable name.
"""

try:
    from ._kslab import *  # noqa: F401,F403
    from ._kslab import __doc__ as _core_doc
except ImportError:
    from _kslab import *  # noqa: F401,F403
    from _kslab import __doc__ as _core_doc

__doc__ = _core_doc or __doc__
