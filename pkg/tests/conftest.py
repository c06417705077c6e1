import numpy as np
import pytest

from hypersindy import autodiff as ad


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar function ``f`` at ``x`` (``x`` is perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def assert_grad_close(analytic, numeric, rtol):
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    err = np.max(np.abs(analytic - numeric)) / scale
    assert err <= rtol, f"relative gradient error {err:.3e} exceeds {rtol}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grad_tools():
    return numeric_grad, assert_grad_close


def leaf(a):
    return ad.Tensor(np.array(a, dtype=np.float64), requires_grad=True)


# ------------------------------------------------------ acceptance reporting

ACCEPTANCE: dict[int, str] = {}


def report_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    """Record one acceptance line; it is echoed immediately and again in the terminal summary."""
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
