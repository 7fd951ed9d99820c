import pytest

from hexplore import profiles
from hexplore import ring
from hexplore import threshold


def test_tiny_levels():
    tiny = profiles.get_profile('tiny')
    # Bootstrapping 13, first threshold 3 * 5 + 1, second threshold 4 * 5 + 1.
    assert tiny.levels == 50
    assert len(tiny.q_bits) == 51
    assert tiny.small_q_bits == [50]
    assert profiles.get_profile('toy').levels == 60


def test_profiles_are_cached():
    assert profiles.get_profile('tiny') is profiles.get_profile('tiny')


def test_unknown_profile():
    with pytest.raises(ring.ParameterError, match='Unknown profile'):
        profiles.get_profile('huge')


def test_set1_only_has_no_bootstrapping():
    profile = profiles.get_profile('set1-only')
    assert not profile.explores
    assert profile.levels == 0
    with pytest.raises(ring.ParameterError):
        profile.boot_params()


def test_analytic_profile_is_not_materialised():
    profile = profiles.get_profile('full-analytic')
    assert profile.levels == 23
    with pytest.raises(ring.ParameterError, match='analytic'):
        profile.ring_params()


def test_overrides():
    tiny = profiles.get_profile('tiny')
    smaller = tiny.with_overrides(threshold1={'beta': 10, 'degrees': [15, 15]})
    assert smaller.levels == tiny.levels - 5
    assert smaller.name == 'tiny'
    assert tiny.threshold1['degrees'] == [15, 15, 15]

    with pytest.raises(ring.ParameterError, match='colour'):
        tiny.with_overrides(colour='red')


def test_small_degree_check():
    with pytest.raises(ring.ParameterError):
        profiles.Profile('bad', 2 ** 4, 2 ** 5, 50, 45, [50])


def test_threshold_params():
    tiny = profiles.get_profile('tiny')
    t1 = tiny.threshold_params(1, 144.)
    assert t1.alpha == threshold.required_alpha(144.) == 9
    assert t1.degrees == [15, 15, 15]

    analytic = profiles.get_profile('full-analytic')
    assert analytic.threshold_params(2, 144.).alpha == 16


def test_tiny_rings():
    tiny = profiles.get_profile('tiny')
    params = tiny.ring_params()
    assert params.degree == 2 ** 8
    assert params.max_level == tiny.levels
    assert tiny.small_ring().degree == 2 ** 4
    assert sorted(tiny.merge_rings()) == [2 ** 5, 2 ** 6, 2 ** 7, 2 ** 8]
    assert tiny.gadget(params).primes_per_digit == 14
    assert tiny.input_scale == params.q[0] / 2. ** 16
