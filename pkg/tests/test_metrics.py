import numpy as np
import pytest

from twinclust.exceptions import LengthMismatch
from twinclust.metrics import accuracy, contingency, evaluate, nmi, purity

from oracles import brute_force_accuracy


def test_accuracy_examples():
    assert accuracy([0, 1, 2, 0], [0, 1, 2, 0]) == 1.0
    assert accuracy([1, 1, 0, 0], [0, 0, 1, 1]) == 1.0
    assert accuracy([0, 1, 0, 1], [0, 0, 1, 1]) == 0.5


def test_accuracy_unequal_cluster_counts():
    assert accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5
    assert accuracy([0, 1, 2, 3], [0, 0, 1, 1]) == 0.5


@pytest.mark.parametrize("seed", range(40))
def test_accuracy_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    c = rng.integers(1, 6)
    truth = rng.integers(0, c, size=20)
    pred = rng.integers(0, rng.integers(1, 6), size=20)
    assert accuracy(pred, truth) == pytest.approx(brute_force_accuracy(pred, truth), abs=1e-15)


def test_nmi_examples():
    assert nmi([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    assert nmi([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-15)


def test_nmi_hand_computed():
    # pred {0,0,1}, truth {0,1,1}: I = (2/3) ln 2 - ... computed from the joint table
    pred, truth = [0, 0, 1], [0, 1, 1]
    p = np.array([[1, 1], [0, 1]]) / 3
    pr, pc = p.sum(1), p.sum(0)
    I = sum(p[i, j] * np.log(p[i, j] / (pr[i] * pc[j])) for i in range(2) for j in range(2) if p[i, j] > 0)
    H = lambda q: -np.sum(q * np.log(q))
    assert nmi(pred, truth) == pytest.approx(I / np.sqrt(H(pr) * H(pc)), abs=1e-12)
    assert nmi(pred, truth, average="arithmetic") == pytest.approx(I / ((H(pr) + H(pc)) / 2), abs=1e-12)


def test_purity_examples():
    assert purity([2, 2, 1], [2, 2, 1]) == 1.0
    assert purity([0, 0, 1], [0, 1, 1]) == pytest.approx(2 / 3)
    assert purity([0, 0, 0, 0, 0], [1, 1, 1, 0, 2]) == pytest.approx(3 / 5)


def test_relabeling_invariance(rng):
    truth = rng.integers(0, 4, size=60)
    pred = rng.integers(0, 4, size=60)
    perm_p = rng.permutation(4)
    perm_t = rng.permutation(4) + 10
    base = evaluate(pred, truth).as_dict()
    moved = evaluate(perm_p[pred], perm_t[truth]).as_dict()
    for k in base:
        assert moved[k] == pytest.approx(base[k], abs=1e-12)


def test_accuracy_one_iff_same_partition(rng):
    truth = rng.integers(0, 3, size=30)
    assert accuracy(np.array([5, 7, 9])[truth], truth) == 1.0
    pred = truth.copy()
    pred[0] = (pred[0] + 1) % 3
    assert accuracy(pred, truth) < 1.0


def test_report_and_contingency():
    rep = evaluate([0, 0, 1, 1], [0, 1, 1, 1])
    assert rep.contingency.sum() == 4
    assert all(0 <= v <= 1 for v in rep.as_dict().values())
    lines = rep.to_lines().splitlines()
    assert [l.split("=")[0] for l in lines] == ["acc", "nmi", "purity"]
    np.testing.assert_array_equal(contingency([0, 0, 1], [1, 0, 0]), [[1, 1], [1, 0]])


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        accuracy([0, 1], [0, 1, 1])
