"""Propensity estimators against hand-computed two-point oracles and
law-of-large-numbers checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streamkde.kernels import GAUSSIAN
from streamkde.propensity import (
    PROPENSITY_FLOOR,
    DegenerateWindowError,
    EmpiricalPropensity,
    KnownPropensity,
    NWPropensity,
    Observation,
    RecursiveNWPropensity,
    RecursiveNWPropensityModel,
    empirical_proportion,
    nw_propensity,
)
from streamkde.schedules import BandwidthSchedule


def obs(delta, value, aux=None):
    if delta == 1:
        return Observation(1, value, value, aux=aux)
    return Observation(0, 0.0, None, aux=aux)


# Oracle: K(0) / (K(0) + K(2)) with the Gaussian kernel.
NW_TWO_POINT = 0.3989422804 / (0.3989422804 + 0.0539909665)
# Oracle: [1 * K(0)] / [1 * K(0) + 2 * K(2)] (bandwidths 1 and 0.5).
RNW_TWO_POINT = 0.3989422804 / (0.3989422804 + 2.0 * 0.0539909665)


def test_observation_invariants():
    with pytest.raises(ValueError):
        Observation(2, 0.0)
    with pytest.raises(ValueError):
        Observation(1, 1.0, t=2.0)  # observed requires x == t
    with pytest.raises(ValueError):
        Observation(0, 1.0)  # missing requires x == 0
    with pytest.raises(ValueError):
        Observation(1, float("nan"), t=float("nan"))


def test_conditioning_value_prefers_aux():
    assert obs(1, 3.0, aux=7.0).conditioning_value == 7.0
    assert obs(1, 3.0).conditioning_value == 3.0


def test_empirical_proportion_examples():
    assert empirical_proportion([obs(1, 0.1)] * 4) == 1.0
    data = [obs(1, 0.1), obs(0, 0.0), obs(1, 0.2), obs(1, 0.3)]
    assert empirical_proportion(data) == 0.75
    with pytest.raises(ValueError):
        empirical_proportion([])


def test_empirical_proportion_concentrates():
    rng = np.random.default_rng(77)
    deltas = (rng.random(10 ** 5) >= 0.3).astype(int)
    data = [obs(int(d), float(v)) for d, v in
            zip(deltas, rng.standard_normal(10 ** 5))]
    assert empirical_proportion(data) == pytest.approx(0.700, abs=0.01)


def test_nw_complete_data_is_one():
    data = [obs(1, v) for v in (-1.0, 0.0, 2.0)]
    for at in (-3.0, 0.0, 5.0):
        assert nw_propensity(data, at, 0.7) == 1.0


def test_nw_two_point_oracle():
    data = [Observation(1, 0.0, 0.0), Observation(0, 0.0, aux=1.0)]
    value = nw_propensity(data, at=0.0, h=0.5)
    assert value == pytest.approx(NW_TWO_POINT, abs=1e-10)
    assert value == pytest.approx(0.880, abs=2e-3)


def test_nw_all_missing_hits_floor():
    data = [Observation(0, 0.0, aux=float(v)) for v in range(4)]
    assert nw_propensity(data, at=1.0, h=1.0) == PROPENSITY_FLOOR


def test_nw_degenerate_window():
    data = [Observation(1, 1.0e6, 1.0e6)]
    with pytest.raises(DegenerateWindowError):
        nw_propensity(data, at=0.0, h=1e-3)


def test_nw_validation():
    data = [obs(1, 0.0)]
    with pytest.raises(ValueError):
        nw_propensity(data, at=float("inf"), h=1.0)
    with pytest.raises(ValueError):
        nw_propensity(data, at=0.0, h=0.0)


def test_recursive_nw_two_point_oracle():
    # install the exact per-observation bandwidths (1, 0.5) by hand
    state = RecursiveNWPropensity(BandwidthSchedule(1.0, 0.5))
    state._cond = [0.0, 1.0]
    state._delta = [1.0, 0.0]
    state._h = [1.0, 0.5]
    value = state.query(0.0)
    assert value == pytest.approx(RNW_TWO_POINT, abs=1e-10)
    assert value == pytest.approx(0.787, abs=1e-3)


def test_recursive_nw_constant_bandwidth_equals_nw():
    rng = np.random.default_rng(5)
    n = 400
    cond = rng.standard_normal(n)
    deltas = (rng.random(n) < 0.6).astype(int)
    data = [Observation(int(d), float(c) if d else 0.0,
                        float(c) if d else None, aux=float(c))
            for d, c in zip(deltas, cond)]
    h = 0.5
    state = RecursiveNWPropensity(BandwidthSchedule(h, 0.2))
    state._cond = [o.conditioning_value for o in data]
    state._delta = [float(o.delta) for o in data]
    state._h = [h] * n
    for at in (-1.0, 0.0, 0.7):
        assert state.query(at) == pytest.approx(
            nw_propensity(data, at, h), rel=1e-12)


def test_recursive_nw_all_observed_is_one():
    state = RecursiveNWPropensity(BandwidthSchedule(1.0, 0.2))
    state.extend([obs(1, float(v)) for v in range(5)])
    assert state.query(2.0) == 1.0


def test_recursive_nw_permutation_invariance():
    """Permuting observations together with their attached bandwidths
    leaves queries unchanged (the sums are symmetric)."""
    rng = np.random.default_rng(9)
    n = 60
    cond = rng.standard_normal(n)
    deltas = (rng.random(n) < 0.5).astype(int)
    sched = BandwidthSchedule(0.8, 0.2)
    h = [sched.value(i + 1) for i in range(n)]
    base = RecursiveNWPropensity(sched)
    base._cond, base._delta, base._h = list(cond), list(map(float, deltas)), h
    perm = rng.permutation(n)
    shuf = RecursiveNWPropensity(sched)
    shuf._cond = [cond[i] for i in perm]
    shuf._delta = [float(deltas[i]) for i in perm]
    shuf._h = [h[i] for i in perm]
    for at in (-0.5, 0.0, 1.2):
        assert base.query(at) == pytest.approx(shuf.query(at), rel=1e-12)


def test_recursive_nw_append_uses_schedule():
    sched = BandwidthSchedule(2.0, 0.5)
    state = RecursiveNWPropensity(sched)
    state.extend([obs(1, 0.0), obs(1, 1.0), obs(0, 0.0)])
    assert state._h == [sched.value(1), sched.value(2), sched.value(3)]


@given(st.integers(1, 40), st.integers(0, 10 ** 6))
@settings(max_examples=40)
def test_scores_respect_floor_and_cap(n, seed):
    rng = np.random.default_rng(seed)
    cond = rng.standard_normal(n)
    deltas = (rng.random(n) < 0.5).astype(int)
    data = [Observation(int(d), float(c) if d else 0.0,
                        float(c) if d else None, aux=float(c))
            for d, c in zip(deltas, cond)]
    for model in (EmpiricalPropensity(), NWPropensity(0.5),
                  RecursiveNWPropensityModel(BandwidthSchedule(0.7, 0.2))):
        scores = model.scores(data)
        assert np.all(scores >= PROPENSITY_FLOOR - 1e-15)
        assert np.all(scores <= 1.0)


def test_models_complete_data():
    data = [obs(1, float(v)) for v in np.linspace(-2, 2, 20)]
    for model in (KnownPropensity(1.0), EmpiricalPropensity(),
                  NWPropensity(0.5),
                  RecursiveNWPropensityModel(BandwidthSchedule(0.7, 0.2))):
        assert model.scores(data) == pytest.approx(np.ones(20), abs=1e-12)


def test_known_propensity_callable():
    data = [obs(1, 0.5), Observation(0, 0.0, t_oracle=2.0)]
    model = KnownPropensity(lambda t: 0.2 + 0.1 * t)
    scores = model.scores(data)
    assert scores[0] == pytest.approx(0.25)
    assert scores[1] == pytest.approx(0.4)


def test_known_propensity_clamps():
    data = [obs(1, 0.0)]
    assert KnownPropensity(0.001).scores(data)[0] == PROPENSITY_FLOOR
    assert KnownPropensity(1.7).scores(data)[0] == 1.0
