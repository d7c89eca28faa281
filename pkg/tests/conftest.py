import numpy as np
import pytest
import torch

from maskdcpt.degrade import build_corpus, load_corpus, write_procedural_dir


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture(scope="session")
def clean_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("clean")
    write_procedural_dir(d, 12, size=32, seed=5)
    return d


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, clean_dir):
    """Five families, 6 samples each, 32x32."""
    root = tmp_path_factory.mktemp("corpus5")
    build_corpus(clean_dir, root, {f: 6 for f in ("H", "RS", "GN", "MB", "LL")}, seed=11)
    return load_corpus(root / "manifest.json")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Print and remember one acceptance line; the summary repeats them in order."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
