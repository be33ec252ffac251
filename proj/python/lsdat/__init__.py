"""Python interface to the lsdat core.

Everything lives in the compiled ``lsdat._core`` extension; this package
re-exports it. Images cross the boundary as ``ImageTensor`` objects, which
convert to and from numpy ``(H, W, C)`` float arrays via ``ImageTensor(arr)``
and ``tensor.numpy()``.

Oracles can be implemented in Python by subclassing ``Oracle`` and defining
``classify(image) -> int`` and ``class_count() -> int``; remember to call
``super().__init__()``.
"""

from lsdat._core import *  # noqa: F401,F403
from lsdat import _core as _c

__all__ = [name for name in dir(_c) if not name.startswith("_")]
__version__ = "0.1.0"
