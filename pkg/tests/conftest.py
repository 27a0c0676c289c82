import zlib

import numpy as np
import pytest

from srpe import params as params_mod
from srpe import scheme
from srpe.afv_pe import pe_setup
from srpe.gauss import make_rng


@pytest.fixture(scope="session")
def toy():
    return params_mod.sys("toy")


@pytest.fixture(scope="session")
def toy64(toy):
    """Toy lattice parameters with room for 64 users."""
    return params_mod.sys("custom", n=toy.n, N=64, ell=toy.ell, kappa=toy.kappa, q=toy.q)


@pytest.fixture(scope="session")
def pe_system(toy):
    pp, msk = pe_setup(toy, make_rng(0x5e7))
    return pp, msk


@pytest.fixture(scope="session")
def srpe_system(toy):
    """(pp, msk) for the toy profile; tree state is made per test."""
    pp, msk, _, _ = scheme.setup(toy, make_rng(0x5e8))
    return pp, msk


@pytest.fixture
def rng(request):
    # distinct, reproducible stream per test
    return np.random.default_rng(zlib.crc32(request.node.nodeid.encode()))


TINY_Q = 1099511627791  # a prime just above 2^40


@pytest.fixture(scope="session")
def tiny():
    """Very small custom parameters for fast plumbing tests."""
    return params_mod.sys("custom", n=2, N=4, ell=2, kappa=8, q=TINY_Q)


@pytest.fixture(scope="session")
def tiny_objects(tiny):
    """One of every scheme object at the tiny parameters."""
    gen = make_rng(0x71)
    pp, msk, rl, state = scheme.setup(tiny, gen)
    x, y = [1, 1], [1, -1]
    sk = scheme.user_kg(tiny, pp, msk, "alice", x, gen)
    tok = scheme.token(tiny, pp, msk, "alice", x, state, gen)
    ep = scheme.Epoch.of(1)
    uk = scheme.upd_kg(tiny, pp, msk, ep, rl, state, gen)
    tk = scheme.tran_kg(tok, uk)
    ct = scheme.enc(tiny, pp, y, ep, 1, gen)
    pct = scheme.transform(tiny, ct, tk)
    return dict(params=tiny, pp=pp, msk=msk, sk=sk, token=tok, uk=uk, tk=tk, ct=ct, pct=pct,
                node=state.node_store[1])


# one PASS/FAIL line per acceptance criterion, printed after the run
_criteria: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    num = getattr(item.function, "criterion", None)
    if num is None:
        return
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        prev = _criteria.get(num)
        if prev is None or prev[0] == "PASS":
            _criteria[num] = (status, (item.function.__doc__ or "").strip().splitlines()[0])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        status, title = _criteria[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {title}")
