"""Python interface to the archfuzz core.

The heavy lifting happens in the compiled ``_archfuzz`` extension. This
package adds JSON decoding of reports and a few conveniences.
"""

import json as _json

from . import _archfuzz
from ._archfuzz import (
    ConfigError,
    Error,
    TraceError,
    backends,
    chebyshev,
    check_gradients,
    fault_classes,
    generate,
    read_trace,
    run,
    write_trace,
)

__all__ = [
    "ConfigError",
    "Error",
    "TraceError",
    "backends",
    "chebyshev",
    "check_gradients",
    "compare",
    "coverage",
    "fault_classes",
    "generate",
    "read_trace",
    "run",
    "run_campaign",
    "write_trace",
]


def compare(paths, t=0.15, epsilon=1e-5, scale_lc_by_loss=False):
    """Runs detection over trace files and returns the report as a dict."""
    return _json.loads(
        _archfuzz.compare([str(p) for p in paths], t, epsilon, scale_lc_by_loss)
    )


def run_campaign(config_text, workdir=None):
    """Runs a campaign; the report and coverage come back decoded."""
    summary = _archfuzz.run_campaign(config_text, None if workdir is None else str(workdir))
    summary["report"] = _json.loads(summary["report"])
    summary["coverage"] = _json.loads(summary["coverage"])
    return summary


def coverage(workdir):
    """Coverage of a persisted campaign as a dict."""
    return _json.loads(_archfuzz.coverage(str(workdir)))
