"""Python bindings for the dmsrd core library."""

try:
    from ._dmsrd import *  # noqa: F401,F403
    from ._dmsrd import __doc__  # noqa: F401
except ImportError:  # in-tree test runs put the extension on PYTHONPATH
    from _dmsrd import *  # noqa: F401,F403
    from _dmsrd import __doc__  # noqa: F401
