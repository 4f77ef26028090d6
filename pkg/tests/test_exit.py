import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from specfuse.exit import (
    ExitMode,
    ExitState,
    apply_exit,
    exit_probabilities,
    exit_threshold,
    no_quality_score_exit,
    normalize_counts,
    normalized_entropy,
    recency_weight,
    run_exit_check,
    softmax,
    softmax_temperature,
    update_state,
    weighted_first_place_counts,
)
from specfuse.types import ModelId

M = [ModelId(i) for i in range(8)]


def test_single_recent_win():
    assert weighted_first_place_counts([(7, M[0])], M[:2], 7) == [1.0, 0.0]


def test_weight_schedule_sum():
    T = 20
    hist = [(T - d, M[0]) for d in (13, 10, 5, 1, 0)]
    # distances 0, 1, 5, 10, 13 -> 1 + 1 + 3/4 + 1/2 + 1/4
    assert weighted_first_place_counts(hist, M[:1], T) == [3.5]


@pytest.mark.parametrize("d,w", [(0, 1), (3, 1), (4, 0.75), (7, 0.75), (8, 0.5), (11, 0.5), (12, 0.25), (100, 0.25)])
def test_boundaries_half_open(d, w):
    assert recency_weight(d) == w


def test_no_wins_and_exited_winners_ignored():
    assert weighted_first_place_counts([], M[:3], 5) == [0.0, 0.0, 0.0]
    assert weighted_first_place_counts([(1, M[5]), (2, M[1])], M[:2], 2) == [0.0, 1.0]


def test_weights_non_increasing():
    ws = [recency_weight(d) for d in range(40)]
    assert all(a >= b for a, b in zip(ws, ws[1:]))


@given(st.lists(st.tuples(st.integers(1, 30), st.integers(0, 3)), max_size=30), st.randoms())
def test_counts_permutation_invariant(raw, rnd):
    hist = [(r, M[i]) for r, i in raw]
    shuffled = hist[:]
    rnd.shuffle(shuffled)
    assert weighted_first_place_counts(hist, M[:4], 30) == pytest.approx(weighted_first_place_counts(shuffled, M[:4], 30), abs=1e-12)


def test_normalize_counts():
    assert normalize_counts([2, 2]) == [0.5, 0.5]
    assert normalize_counts([3.5, 0.5]) == [0.875, 0.125]
    assert normalize_counts([0, 0, 0]) == [1 / 3] * 3


def test_entropy_extremes():
    assert normalized_entropy([0.25] * 4, 4) == pytest.approx(1.0, abs=1e-9)
    assert normalized_entropy([1.0, 0.0, 0.0], 3) == 0.0


def test_entropy_partial():
    assert normalized_entropy([0.5, 0.5, 0.0], 3) == pytest.approx(math.log(2) / math.log(3), abs=1e-12)
    assert math.log(2) / math.log(3) == pytest.approx(0.6309, abs=1e-4)


def test_entropy_requires_two_models():
    with pytest.raises(ValueError):
        normalized_entropy([1.0], 1)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=8))
def test_entropy_in_unit_interval(r):
    h = normalized_entropy(normalize_counts(r), len(r))
    assert 0.0 <= h <= 1.0


def test_uniform_quality_gives_uniform_p():
    for H, T in [(0, 1), (1, 16), (0.3, 100)]:
        assert exit_probabilities([0.7] * 3, H, T, ExitMode()) == pytest.approx([1 / 3] * 3, abs=1e-15)


def test_zero_entropy_plain_softmax():
    p = exit_probabilities([2, 1, 1], 0.0, 9, ExitMode())
    z = math.exp(2) + 2 * math.exp(1)
    assert p == pytest.approx([math.exp(2) / z, math.exp(1) / z, math.exp(1) / z], abs=1e-12)
    assert p == pytest.approx([0.5761, 0.2119, 0.2119], abs=1e-4)


def test_temperature_flattens():
    assert softmax_temperature(ExitMode(), 1.0, 16) == 4.0
    sharp = exit_probabilities([2, 1, 1], 0.0, 16, ExitMode())
    flat = exit_probabilities([2, 1, 1], 1.0, 16, ExitMode())
    assert max(flat) < max(sharp)


@pytest.mark.parametrize("mode,H,T,tau", [
    ("full", 0.5, 4, 1.0),
    ("full", 0.8, 25, 4.0),
    ("no-entropy", 0.0, 25, 5.0),
    ("no-entropy", 0.0, 0.25, 1.0),
    ("fixed-temp:sqrtT", 0.1, 36, 6.0),
    ("fixed-temp:1", 1.0, 100, 1.0),
    ("fixed-temp:2.5", 1.0, 100, 2.5),
])
def test_temperature_by_mode(mode, H, T, tau):
    assert softmax_temperature(ExitMode.parse(mode), H, T) == tau


def test_threshold_golden():
    assert exit_threshold(0.5, 5) == pytest.approx(0.1, abs=1e-15)


def test_apply_exit_threshold():
    keep, gone = apply_exit([0.55, 0.30, 0.15], ExitMode(), M[:3])
    assert keep == M[:2] and gone == [M[2]]


def test_apply_exit_uniform_keeps_all():
    keep, gone = apply_exit([0.25] * 4, ExitMode(lam=0.99), M[:4])
    assert keep == M[:4] and gone == []


@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=8),
    st.floats(0, 1),
    st.integers(1, 400),
    st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]),
)
def test_survival_and_normalization(Q, H, T, lam):
    mode = ExitMode(lam=lam)
    p = exit_probabilities(Q, H, T, mode)
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-9)
    keep, gone = apply_exit(p, mode, M[: len(Q)])
    assert keep and len(keep) + len(gone) == len(Q)


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=8), st.floats(0.5, 10))
def test_stable_softmax_matches_naive(values, tau):
    naive = [math.exp(v / tau) for v in values]
    z = sum(naive)
    assert softmax(values, tau) == pytest.approx([x / z for x in naive], abs=1e-12)


def test_update_state_accumulates():
    s = ExitState.start(M[:2])
    s.round = 1
    update_state(s, [0.5, 0.3], M[0])
    assert s.quality_of(M[:2]) == [0.5, 0.3]
    assert s.first_place_history == [(1, M[0])]
    s.round = 2
    update_state(s, [0.1, 0.7], M[1])
    assert s.quality_of(M[:2]) == pytest.approx([0.6, 1.0])


def test_update_state_replay_ledger():
    rng = random.Random(7)
    s = ExitState.start(M[:4])
    ledger = [0.0] * 4
    for t in range(1, 21):
        q = [rng.random() for _ in range(4)]
        s.round = t
        update_state(s, q, M[q.index(max(q))])
        for i in range(4):
            ledger[i] += q[i]
    assert s.quality_of(M[:4]) == ledger
    assert [r for r, _ in s.first_place_history] == list(range(1, 21))


def test_update_state_rejects_misaligned():
    s = ExitState.start(M[:3])
    s.round = 1
    with pytest.raises(ValueError):
        update_state(s, [0.1], M[0])


def test_window_exit_definitional():
    hist = [(t, M[0]) for t in range(1, 11)] + [(11, M[1])]
    assert no_quality_score_exit(hist[:10], 10, 10, M[:2]) == [M[0]]
    assert no_quality_score_exit(hist, 11, 10, M[:2]) == M[:2]


def test_window_exit_vacuous():
    hist = [(t, M[t - 1]) for t in range(1, 6)]
    assert no_quality_score_exit(hist, 5, 5, M[:5]) == M[:5]


def test_window_exit_scripted():
    hist = [(t, M[t % 2]) for t in range(1, 8)]
    assert no_quality_score_exit(hist, 7, 7, M[:5]) == M[:2]


def test_exit_mode_parsing_round_trip():
    for text in ["full", "off", "no-entropy", "fixed-temp:1", "fixed-temp:sqrtT", "no-quality-score:15"]:
        assert str(ExitMode.parse(text)) == text
    with pytest.raises(ValueError):
        ExitMode(lam=1.0)
    with pytest.raises(ValueError):
        ExitMode.parse("bogus")


def test_off_never_prunes_and_singleton_skips():
    s = ExitState.start(M[:3])
    for t in range(1, 30):
        s.round = t
        update_state(s, [0.9, 0.0, 0.0], M[0])
        assert run_exit_check(s, ExitMode("off")).exited == ()
    assert s.active == M[:3]
    solo = ExitState.start(M[:1])
    solo.round = 1
    update_state(solo, [0.1], M[0])
    assert run_exit_check(solo, ExitMode()).exited == ()


def test_full_mode_prunes_a_dominated_model_monotonically():
    s = ExitState.start(M[:3])
    sizes = []
    for t in range(1, 40):
        s.round = t
        q = {m.index: v for m, v in zip(M[:3], [0.9, 0.8, 0.05])}
        update_state(s, q, M[0])
        run_exit_check(s, ExitMode())
        sizes.append(len(s.active))
    assert sizes[-1] < 3 and M[0] in s.active
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))
