"""Select the compiled core when available, else the numpy fallback.

Set ``CFGP_PURE_PYTHON=1`` to force the fallback (used by the backend
comparison tests and benchmark).
"""

import os

from . import _pycore

core = _pycore
NAME = "python"

if not os.environ.get("CFGP_PURE_PYTHON"):
    try:
        from . import _ccore as core  # noqa: F811
        NAME = "cython"
    except ImportError:  # extension not built
        core = _pycore

available = {"python": _pycore}
try:
    from . import _ccore as _c

    available["cython"] = _c
except ImportError:
    pass


def get(name=None):
    """Return a backend module by name, defaulting to the active one."""
    if name is None:
        return core
    return available[name]
