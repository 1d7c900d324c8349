import shutil
import sys
from pathlib import Path

import pytest
import yaml

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def pipeline_dir(tmp_path):
    """Copy of the pipeline fixture directory, writable."""
    dst = tmp_path / "pipeline"
    shutil.copytree(FIXTURES / "pipeline", dst)
    return dst


def write_config(path, **sections):
    path = Path(path)
    path.write_text(yaml.safe_dump(sections, sort_keys=True))
    return path


# (criterion number, title, passed, detail), filled in by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    grouped = {}
    for n, title, ok, detail in ACCEPTANCE_RESULTS:
        grouped.setdefault(n, []).append((title, ok, detail))
    for n in sorted(grouped):
        parts = grouped[n]
        ok = all(p[1] for p in parts)
        if len(parts) == 1:
            title, _, detail = parts[0]
        else:
            # parametrized criterion: summarize its cases on one line
            title = parts[0][0].split(",")[0]
            failed = [p for p in parts if not p[1]]
            detail = f"{len(parts) - len(failed)}/{len(parts)} cases passed"
            if failed:
                detail += f"; first failure: {failed[0][0]}: {failed[0][2]}"
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
