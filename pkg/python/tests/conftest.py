"""
Shared pytest fixtures for the jacobichain tests.

Provides:
- rng              : seeded numpy Generator (fresh per test)
- kraw_half        : Krawtchouk N=4, p=1/2 (integer spectrum, PST at pi)
- kraw_skew        : Krawtchouk N=8, p=0.3
- hahn_spec        : Hahn N=6, alpha=beta=1
- dualhahn_pst     : dual Hahn N=5, gamma=delta=1/2
- racah_spec       : Racah N=5, beta=9.5, gamma=0.7, delta=1.3
- run_cli          : calls app.cli.main(argv) and returns (exit code, stdout, stderr)
"""
import os
import sys

import numpy as np
import pytest

# Make sure the backend package is importable
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "backend"))

from app.models import FamilySpec  # noqa: E402


# ── Random numbers ────────────────────────────────────────────────────────────

@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ── Family specs ──────────────────────────────────────────────────────────────

@pytest.fixture
def kraw_half():
    return FamilySpec.krawtchouk(4, 0.5)


@pytest.fixture
def kraw_skew():
    return FamilySpec.krawtchouk(8, 0.3)


@pytest.fixture
def hahn_spec():
    return FamilySpec.hahn(6, 1.0, 1.0)


@pytest.fixture
def dualhahn_pst():
    return FamilySpec.dualhahn(5, 0.5, 0.5)


@pytest.fixture
def racah_spec():
    return FamilySpec.racah(5, 9.5, 0.7, 1.3)


# ── CLI ───────────────────────────────────────────────────────────────────────

@pytest.fixture
def run_cli(capsys):
    """Run the CLI in-process; argparse usage errors come back as exit code 2."""
    from app.cli import main

    def _run(*argv: str):
        try:
            code = main(list(argv))
        except SystemExit as exc:
            code = exc.code
        out, err = capsys.readouterr()
        return code, out, err

    return _run
