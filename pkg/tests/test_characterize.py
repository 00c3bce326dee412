from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ownet.characterize import (DEFAULT_SECTORS, MacroSector, SectorMap, dominance_summary,
                                herfindahl, hypergeom_sf, over_expression, over_expression_rate,
                                profile, profiles, region_key)


def sf_exact(k, N, K, n):
    return Fraction(sum(comb(K, i) * comb(N - K, n - i) for i in range(k, min(K, n) + 1)),
                    comb(N, n))


def test_all_successes_example():
    assert hypergeom_sf(5, 100, 5, 5) == pytest.approx(1 / comb(100, 5), rel=1e-9)


def test_sf_against_rational_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        N = int(rng.integers(1, 150))
        K, n = (int(x) for x in rng.integers(0, N + 1, size=2))
        k = int(rng.integers(0, min(K, n) + 2))
        want = float(sf_exact(k, N, K, n))
        got = hypergeom_sf(k, N, K, n)
        assert got == pytest.approx(want, rel=1e-11, abs=1e-300)


def test_sf_against_scipy_at_scale():
    N, K, n = 100000, 2500, 1800
    k = np.arange(0, 200)
    ref = np.exp(stats.hypergeom.logsf(k - 1, N, K, n))
    assert np.allclose(hypergeom_sf(k, N, K, n), ref, rtol=1e-8, atol=0)


def test_sf_edges():
    assert hypergeom_sf(0, 10, 3, 4) == 1.0
    assert hypergeom_sf(5, 10, 3, 4) == 0.0
    assert hypergeom_sf(np.array([1, 2]), 10, 3, 4).shape == (2,)


def test_herfindahl():
    assert herfindahl([1, 1, 1, 1]) == 0.25
    assert herfindahl([7]) == 1.0
    with pytest.raises(ValueError):
        herfindahl([0, 0])
    with pytest.raises(ValueError):
        herfindahl([-1, 2])


def test_profile_ties_and_missing():
    p = profile(3, ["US", "DE", "DE", "US", "??"], ["financial", "??", "??", "??", "??"])
    assert (p.c1, p.c2) == ("DE", "US")
    assert p.share_c1 == 0.5 and p.herf_country == 0.5
    assert p.s1 == "financial" and p.s2 is None and p.share_s1 == 1.0
    assert profile(0, ["??"], ["??"]).missing


def test_profiles_and_dominance(planted_small):
    spec, g = planted_small
    from ownet.synthetic import planted_labels
    profs = profiles(g, planted_labels(spec))
    assert [p.n_firms for p in profs] == [20] * 4
    assert [p.community for p in profs] == [0, 1, 2, 3]
    d = dominance_summary(profs, min_size=5)
    assert d["n_communities"] == 4 and d["mean_share_c1"] == 1.0
    assert np.isnan(dominance_summary(profs, min_size=50)["mean_share_c1"])


def test_sector_map():
    m = DEFAULT_SECTORS
    assert m.contains([6512, 100, -1], MacroSector.FINANCIAL).tolist() == [True, False, False]
    assert m([-1])[0] == "??" and m([9999])[0] == "state_social"
    custom = SectorMap([("financial", 0, 5000)], "services")
    assert custom([10, 6000]).tolist() == ["financial", "services"]
    assert region_key("US") != region_key("ZZ") == "OTHER"


def test_over_expression_against_brute_force():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 4, size=60)
    values = np.where(rng.random(60) < 0.1, "??", rng.choice(["x", "y", "z"], size=60))
    values[labels == 2] = "x"
    rep = over_expression(labels, values, alpha=0.05)
    known = values != "??"
    N = int(known.sum())
    assert rep.N == N
    assert rep.n_tests == len(np.unique(labels[known])) * len(np.unique(values[known]))
    for row in rep.rows():
        c, v = row["community_id"], row["value"]
        n = int(((labels == c) & known).sum())
        K = int((values == v).sum())
        k = int(((labels == c) & (values == v)).sum())
        assert (row["n"], row["K"], row["k"]) == (n, K, k)
        assert row["p_value"] == pytest.approx(float(sf_exact(k, N, K, n)), rel=1e-10)
        assert row["over_expressed"] == (row["p_value"] < 0.05 / rep.n_tests)
    assert rep.flagged_for(2)[0][0] == "x"
    assert 0 < over_expression_rate(rep) <= 1
    with pytest.raises(ValueError):
        over_expression([0, 1], ["??", "??"])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 80), st.data())
def test_sf_monotone_in_k(N, data):
    K = data.draw(st.integers(0, N))
    n = data.draw(st.integers(0, N))
    p = hypergeom_sf(np.arange(0, min(K, n) + 2), N, K, n)
    assert (np.diff(p) <= 1e-15).all()
    assert p[0] == 1.0
