"""CTC loss vs the path-enumeration oracle, decoding semantics, gradients."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonseg import autodiff as ad
from phonseg import ctc
from phonseg.errors import InfeasibleTargetError, OracleSizeError

from gradcheck import check_gradients


def log_softmax(x):
    s = x - x.max(axis=1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def random_grid(np_rng, T, C):
    return log_softmax(np_rng.uniform(-3, 3, size=(T, C)))


# ---------------------------------------------------------------------------
# hand-worked cases


def test_single_frame_single_label():
    logits = np.array([[0.3, -1.2, 2.0]])
    node = ctc.ctc_loss(ad.constant(logits), [1])
    expected = -log_softmax(logits)[0, 1]
    assert node.value[0, 0] == pytest.approx(expected, abs=1e-12)


def test_two_frames_one_label_three_paths():
    # paths collapsing to [a]: (a,a), (a,blank), (blank,a)
    np_rng = np.random.default_rng(0)
    lp = random_grid(np_rng, 2, 3)  # K=2 plus blank
    p = np.exp(lp)
    a = 0
    blank = 2
    expected = -np.log(
        p[0, a] * p[1, a] + p[0, a] * p[1, blank] + p[0, blank] * p[1, a]
    )
    got = ctc.ctc_loss_value(lp, [a])
    assert got == pytest.approx(expected, abs=1e-10)


def test_all_mass_on_blank_nonempty_target_is_infeasible():
    lp = np.log(np.array([[1e-300, 1e-300, 1.0]] * 3))
    lp = log_softmax(lp)
    bf = ctc.brute_force_ctc(lp, [0])
    assert bf > 600  # probability numerically zero


def test_one_hot_correct_path_loss_near_zero():
    # T == |target|, distinct labels, near-one-hot rows
    logits = np.array(
        [[50.0, 0.0, 0.0, 0.0], [0.0, 50.0, 0.0, 0.0], [0.0, 0.0, 50.0, 0.0]]
    )
    lp = log_softmax(logits)
    assert ctc.brute_force_ctc(lp, [0, 1, 2]) == pytest.approx(0.0, abs=1e-10)
    assert ctc.ctc_loss_value(lp, [0, 1, 2]) == pytest.approx(0.0, abs=1e-10)


def test_infeasible_target_raises():
    logits = ad.constant(np.zeros((2, 3)))
    with pytest.raises(InfeasibleTargetError):
        ctc.ctc_loss(logits, [0, 0])  # repeat needs 3 frames


def test_oracle_size_bound():
    lp = np.zeros((30, 5))
    with pytest.raises(OracleSizeError):
        ctc.brute_force_ctc(lp, [0])


def test_min_frames():
    assert ctc.min_frames([]) == 0
    assert ctc.min_frames([1, 2, 3]) == 3
    assert ctc.min_frames([1, 1, 2, 2, 2]) == 8


# ---------------------------------------------------------------------------
# decoding


def test_greedy_decode_collapse():
    # frame argmaxes a a φ b b φ with blank = 2
    grid = np.full((6, 3), -5.0)
    for t, lab in enumerate([0, 0, 2, 1, 1, 2]):
        grid[t, lab] = 0.0
    assert ctc.greedy_decode(grid) == [0, 1]


def test_greedy_decode_all_blank():
    grid = np.zeros((4, 3))
    grid[:, 2] = 1.0
    assert ctc.greedy_decode(grid) == []


def test_greedy_decode_blank_separates_repeats():
    grid = np.full((3, 3), -5.0)
    for t, lab in enumerate([0, 2, 0]):
        grid[t, lab] = 0.0
    assert ctc.greedy_decode(grid) == [0, 0]


def test_greedy_decode_tie_breaks_low_index():
    grid = np.zeros((2, 4))
    assert ctc.greedy_decode(grid) == [0]


@given(
    st.lists(st.integers(min_value=0, max_value=3), min_size=0, max_size=12),
)
@settings(max_examples=200, deadline=None)
def test_collapse_matches_run_grouping_oracle(frames):
    import itertools

    decoded = ctc.collapse(frames, blank=3)
    # oracle: one label per maximal non-blank run
    runs = [lab for lab, _ in itertools.groupby(frames) if lab != 3]
    assert decoded == runs
    assert 3 not in decoded
    # blank-separated repeats are the only source of adjacent equals; once
    # runs are taken, collapsing again with no blanks merges only those
    if all(a != b for a, b in zip(decoded, decoded[1:])):
        assert ctc.collapse(decoded, blank=3) == decoded


# ---------------------------------------------------------------------------
# oracle agreement, gradients, properties


def test_loss_matches_oracle_500_random_instances():
    np_rng = np.random.default_rng(2026)
    for _ in range(500):
        T = int(np_rng.integers(1, 7))
        K = int(np_rng.integers(1, 5))
        L = int(np_rng.integers(0, min(3, T) + 1))
        labels = np_rng.integers(0, K, size=L)
        while T < ctc.min_frames(labels):  # repeats may need extra frames
            labels = labels[:-1]
        lp = random_grid(np_rng, T, K + 1)
        got = ctc.ctc_loss_value(lp, labels)
        want = ctc.brute_force_ctc(lp, labels)
        assert got == pytest.approx(want, abs=1e-6), (T, K, labels)


def test_loss_nonnegative(np_rng):
    for _ in range(50):
        T = int(np_rng.integers(1, 6))
        K = int(np_rng.integers(1, 4))
        labels = np_rng.integers(0, K, size=min(2, T))
        if T < ctc.min_frames(labels):
            continue
        lp = random_grid(np_rng, T, K + 1)
        assert ctc.ctc_loss_value(lp, labels) >= -1e-9


def test_gradient_matches_finite_differences(np_rng):
    for trial in range(5):
        T = int(np_rng.integers(2, 6))
        K = 3
        labels = np_rng.integers(0, K, size=2)
        if T < ctc.min_frames(labels):
            labels = labels[:1]
        logits = ad.parameter(np_rng.uniform(-2, 2, size=(T, K + 1)))
        check_gradients(
            lambda: ctc.ctc_loss(logits, labels),
            [logits],
            context=f"ctc-{trial}",
        )


def test_concentrating_mass_on_unique_path_decreases_loss():
    # unique feasible path when T == |labels| and labels have no repeats
    labels = [0, 1, 2]
    base = np.zeros((3, 4))
    losses = []
    for boost in (0.0, 1.0, 3.0, 6.0):
        logits = base.copy()
        for t, lab in enumerate(labels):
            logits[t, lab] += boost
        losses.append(ctc.ctc_loss_value(log_softmax(logits), labels))
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_empty_target_probability_of_all_blank_paths():
    np_rng = np.random.default_rng(3)
    lp = random_grid(np_rng, 3, 3)
    want = -lp[:, 2].sum()  # single path: blank everywhere
    assert ctc.ctc_loss_value(lp, []) == pytest.approx(want, abs=1e-10)
    assert ctc.brute_force_ctc(lp, []) == pytest.approx(want, abs=1e-10)
