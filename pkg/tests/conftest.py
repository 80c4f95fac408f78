import textwrap

import pytest

# Classic filter behavior: die on SIGPIPE instead of raising BrokenPipeError.
FILTER_PRELUDE = """\
#!/usr/bin/env python3
import os, signal, sys
signal.signal(signal.SIGPIPE, signal.SIG_DFL)
"""


@pytest.fixture
def make_filter(tmp_path):
    """Write a small executable filter script; returns its path as str."""

    def make(name: str, body: str) -> str:
        path = tmp_path / name
        path.write_text(FILTER_PRELUDE + textwrap.dedent(body))
        path.chmod(0o755)
        return str(path)

    return make
