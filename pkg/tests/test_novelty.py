from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftlearn.errors import ArgumentError, InternalError, MissingTargetError
from driftlearn.novelty import (
    FAMILIAR,
    NOVEL,
    FamiliarityBuffer,
    NoveltyBuffer,
    Sample,
    Threshold,
    adjust_threshold,
    classify,
    export_buffer_csv,
    score,
)


class FakeBlock:
    def __init__(self, role="autoencoder", target_id=None, output=None):
        self.role = role
        self.target_id = target_id
        self._output = output

    def model_output(self, x):
        return self._output if self._output is not None else x


def mk_sample(i=0, x=(0.1, 0.2), y=None):
    return Sample(datetime(2021, 1, 1) + timedelta(hours=i), np.array(x, dtype=float), y)


# --- scoring ---------------------------------------------------------------------

def test_perfect_reconstruction_scores_zero():
    assert score(FakeBlock(), mk_sample()) == 0.0


def test_score_hand_computed():
    block = FakeBlock(output=np.array([1.0, 1.0]))
    assert score(block, mk_sample(x=(0.0, 1.0))) == pytest.approx(0.5)


def test_mean_of_sample_scores_equals_stacked_mse():
    rng = np.random.default_rng(0)
    out = np.array([0.3, 0.4])
    block = FakeBlock(output=out)
    xs = rng.random((10, 2))
    samples = [mk_sample(i, x=tuple(x)) for i, x in enumerate(xs)]
    per_sample = np.array([score(block, s) for s in samples])
    stacked = np.mean((xs - out) ** 2)
    assert per_sample.mean() == pytest.approx(stacked, abs=1e-12)


def test_predictor_requires_target():
    block = FakeBlock(role="predictor", target_id="p1", output=np.array([0.5]))
    with pytest.raises(MissingTargetError):
        score(block, mk_sample())
    s = mk_sample(y={"p1": 0.75})
    assert score(block, s) == pytest.approx(0.0625)


def test_sample_validation():
    with pytest.raises(Exception):
        Sample(datetime(2021, 1, 1), np.array([]))
    with pytest.raises(ArgumentError):
        Sample(datetime(2021, 1, 1), np.array([np.nan, 1.0]))
    with pytest.raises(ArgumentError):
        Sample(datetime(2021, 1, 1), np.array([0.5]), {"t": float("inf")})


# --- classification ----------------------------------------------------------------

def test_classify_strict_inequality():
    assert classify(0.2, Threshold(0.1)) == NOVEL
    assert classify(0.1, Threshold(0.1)) == FAMILIAR
    assert classify(0.0, Threshold(0.0)) == FAMILIAR


def test_classify_negative_score_is_internal_error():
    with pytest.raises(InternalError):
        classify(-1e-9, Threshold(0.1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_classify_monotone_in_threshold(s, lo, hi):
    lo, hi = sorted((lo, hi))
    if classify(s, Threshold(lo)) == FAMILIAR:
        assert classify(s, Threshold(hi)) == FAMILIAR


def test_zero_score_always_familiar():
    for t in (0.0, 0.01, 5.0):
        assert classify(0.0, Threshold(t)) == FAMILIAR


# --- buffers -------------------------------------------------------------------------

def test_novelty_buffer_fills_and_reports():
    buf = NoveltyBuffer(capacity=3)
    statuses = [buf.push(mk_sample(i)) for i in range(3)]
    assert [s.fill for s in statuses] == [1, 2, 3]
    assert statuses[-1].is_full


def test_overflow_goes_to_pending():
    buf = NoveltyBuffer(capacity=3)
    for i in range(4):
        buf.push(mk_sample(i))
    assert buf.fill == 3
    assert len(buf.pending) == 1
    assert [e.sample.timestamp.hour for e in buf.items] == [0, 1, 2]


def test_drain_returns_fifo_and_promotes_pending():
    buf = NoveltyBuffer(capacity=3)
    for i in range(5):
        buf.push(mk_sample(i))
    drained = buf.drain()
    assert [s.timestamp.hour for s in drained] == [0, 1, 2]
    assert buf.fill == 2
    assert [e.sample.timestamp.hour for e in buf.items] == [3, 4]
    assert not buf.pending


def test_drain_empty_buffer():
    assert NoveltyBuffer(capacity=2).drain() == []


def test_familiarity_buffer_never_full():
    buf = FamiliarityBuffer()
    for i in range(1000):
        status = buf.push(mk_sample(i))
        assert not status.is_full
    assert buf.fill == 1000


def test_familiarity_retention_cap_evicts_oldest():
    buf = FamiliarityBuffer(cap=5)
    for i in range(8):
        buf.push(mk_sample(i))
    assert buf.fill == 5
    assert buf.evicted == 3
    assert [e.sample.timestamp.hour for e in buf.items] == [3, 4, 5, 6, 7]


def test_shrink_capacity_moves_oldest_to_pending():
    buf = NoveltyBuffer(capacity=5)
    for i in range(5):
        buf.push(mk_sample(i))
    buf.shrink_capacity(3)
    assert buf.capacity == 3
    assert [e.sample.timestamp.hour for e in buf.items] == [2, 3, 4]
    assert [e.sample.timestamp.hour for e in buf.pending] == [0, 1]
    drained = buf.drain()
    assert [s.timestamp.hour for s in drained] == [2, 3, 4]
    assert [e.sample.timestamp.hour for e in buf.items] == [0, 1]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(0, 40))
def test_fill_and_pending_counts(capacity, pushes):
    buf = NoveltyBuffer(capacity=capacity)
    for i in range(pushes):
        buf.push(mk_sample(i))
    assert buf.fill == min(pushes, capacity)
    assert len(buf.pending) == max(0, pushes - capacity)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.booleans(), max_size=60))
def test_drain_never_reorders(ops):
    # True -> push next sample, False -> drain; order must follow arrival.
    buf = NoveltyBuffer(capacity=4)
    arrival = 0
    seen: list[int] = []
    for op in ops:
        if op:
            buf.push(mk_sample(arrival))
            arrival += 1
        else:
            seen.extend(s.timestamp.hour for s in buf.drain())
    seen.extend(s.timestamp.hour for s in buf.drain())
    while buf.fill:
        seen.extend(s.timestamp.hour for s in buf.drain())
    assert seen == sorted(seen)


def test_sample_uniform_is_seeded():
    buf = FamiliarityBuffer()
    for i in range(50):
        buf.push(mk_sample(i))
    a = buf.sample_uniform(10, np.random.default_rng(7))
    b = buf.sample_uniform(10, np.random.default_rng(7))
    assert [s.timestamp for s in a] == [s.timestamp for s in b]
    assert len(a) == 10


# --- threshold adaptation --------------------------------------------------------------

def test_adjust_threshold_max_under_q1():
    th = Threshold(0.5, q=1.0, alpha=1.0)
    out = adjust_threshold(th, [0.01, 0.02, 0.03])
    assert out.value == pytest.approx(0.03)


def test_adjust_threshold_quantile_oracle():
    # [DERIVED] oracle: explicit sort-based linear-interpolation quantile
    rng = np.random.default_rng(21)
    scores = rng.random(100)
    th = Threshold(1.0, q=0.95, alpha=1.5)
    out = adjust_threshold(th, list(scores))

    srt = np.sort(scores)
    pos = 0.95 * (len(srt) - 1)
    lo = int(np.floor(pos))
    frac = pos - lo
    expected = 1.5 * (srt[lo] * (1 - frac) + srt[min(lo + 1, len(srt) - 1)] * frac)
    assert out.value == pytest.approx(expected, rel=1e-12)


def test_adjust_threshold_empty_scores_unchanged():
    th = Threshold(0.4)
    assert adjust_threshold(th, []) is th


def test_fixed_threshold_never_moves():
    th = Threshold(0.4, adaptation="fixed")
    assert adjust_threshold(th, [9.0, 9.0]) is th


def test_threshold_validation():
    with pytest.raises(ArgumentError):
        Threshold(-0.1)
    with pytest.raises(ArgumentError):
        Threshold(0.1, q=1.5)


# --- export ------------------------------------------------------------------------------

def test_export_buffer_csv(tmp_path):
    buf = NoveltyBuffer(capacity=4)
    buf.push(mk_sample(0, y={"p": 0.9}), score_value=0.12)
    buf.push(mk_sample(1, y={"p": 0.8}), score_value=0.34)
    path = tmp_path / "buf.csv"
    export_buffer_csv(buf, path, feature_names=["a", "b"], target_id="p")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "timestamp,a,b,target,score"
    assert len(lines) == 3
    assert lines[1].endswith("0.12")
    assert "0.9" in lines[1]
