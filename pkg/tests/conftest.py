import numpy as np
import pytest
from sklearn.datasets import make_blobs, make_moons


def blobs3():
    return make_blobs(n_samples=150, centers=3, cluster_std=1.0, random_state=7)


def blobs2():
    return make_blobs(n_samples=100, centers=[[-5, 0], [5, 0]], cluster_std=1.0, random_state=3)


def moons():
    return make_moons(n_samples=200, noise=0.06, random_state=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def three_blobs():
    return blobs3()


@pytest.fixture(scope="session")
def two_blobs():
    return blobs2()


@pytest.fixture(scope="session")
def two_moons():
    return moons()


def random_simplex_matrix(rng, n, sparsity=0.0):
    Z = rng.random((n, n))
    if sparsity:
        Z[rng.random((n, n)) < sparsity] = 0.0
        Z[np.arange(n), np.arange(n)] += 1e-3
    return Z / Z.sum(axis=0)


def block_similarity(rng, sizes):
    """Column-stochastic block-diagonal matrix with strictly positive blocks."""
    n = sum(sizes)
    Z = np.zeros((n, n))
    start = 0
    for s in sizes:
        Z[start : start + s, start : start + s] = rng.random((s, s)) + 0.1
        start += s
    return Z / Z.sum(axis=0)


def orthonormal(rng, n, c):
    Q, _ = np.linalg.qr(rng.normal(size=(n, c)))
    return Q


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_terminal_summary(terminalreporter):
    verdicts = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props or (rep.when != "call" and rep.passed):
                continue
            num, title = props["criterion"]
            ok = verdicts.get(num, (title, True))[1] and rep.passed
            verdicts[num] = (title, ok)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        title, ok = verdicts[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(autouse=True)
def _record_criterion(request):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        request.node.user_properties.append(("criterion", tuple(mark.args)))
