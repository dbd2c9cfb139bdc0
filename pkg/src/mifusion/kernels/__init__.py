"""LSTM kernels: compiled extension when built, numpy fallback.

Set MIFUSION_PURE_PYTHON=1 before import to force the fallback; the
benchmark in benchmarks/bench_lstm.py compares the two backends directly.
"""

import os

from . import pyref

try:
    from . import _lstm as _compiled
except ImportError:
    _compiled = None

if _compiled is not None and not os.environ.get("MIFUSION_PURE_PYTHON"):
    _impl = _compiled
    BACKEND = "compiled"
else:
    _impl = pyref
    BACKEND = "python"

compiled = _compiled
lstm_seq_forward = _impl.lstm_seq_forward
lstm_seq_backward = _impl.lstm_seq_backward
lstm_group_forward = _impl.lstm_group_forward
lstm_group_backward = _impl.lstm_group_backward
