import random

import pytest

from fuzzypsu.crypto import SchemeDescriptor, e_setup

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def mock_keys():
    return e_setup(SchemeDescriptor.mock(), random.Random(11))


@pytest.fixture(scope="session")
def paillier_keys():
    return e_setup(SchemeDescriptor.residuosity(), random.Random(12))


@pytest.fixture(params=["mock", "paillier"])
def keys(request, mock_keys, paillier_keys):
    return mock_keys if request.param == "mock" else paillier_keys


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: (int(s.split()[0]), s)):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"criterion {name}: {'PASS' if ok else 'FAIL'}  {detail}")
