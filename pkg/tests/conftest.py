import pytest

from reachkit.fixtures import gen_ak, gen_controls, gen_smycka
from reachkit.geometry import build_sphere_net


@pytest.fixture(scope="session")
def circle():
    return gen_controls("circle", {"r": 1.0, "n": 2000})


@pytest.fixture(scope="session")
def circle_curve():
    return gen_controls("circle", {"r": 1.0, "n": 6284}, curve=True)


@pytest.fixture(scope="session")
def square():
    return gen_controls("square_boundary", {"side": 2.0, "n": 100})


@pytest.fixture(scope="session")
def quarter_arc():
    return gen_controls("arc", {"r": 1.0, "n": 400})


@pytest.fixture(scope="session")
def smycka():
    return gen_smycka((-3.0, 3.0), 4001)


@pytest.fixture(scope="session")
def ak012():
    return gen_ak([0.0, 1.0, 2.0], 2000)


@pytest.fixture(scope="session")
def net2():
    return build_sphere_net(2, 0.1)


@pytest.fixture(scope="session")
def net2q():
    return build_sphere_net(2, 0.25)


# ---------------------------------------------------------------- acceptance reporting

ACCEPTANCE_LINES = []


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.notes = number, title, []

    def note(self, text):
        self.notes.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.notes)
        if exc_type is not None:
            msg = str(exc).strip().splitlines()
            detail = (detail + "; " if detail else "") + (msg[0] if msg else exc_type.__name__)
        line = f"criterion {self.number:2d} {status}: {self.title}"
        ACCEPTANCE_LINES.append((self.number, line + (f" ({detail})" if detail else "")))
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
