import numpy as np
import pytest

from blowup.fields import (
    Ball, Box, IncompatibleSamplesError, ScalarField, VectorMapping, format_domain,
    mapping_quotient, mcshane_extend, parse_domain, quotient_V, quotient_values,
    read_samples_csv, square_field, zero_set_probe,
)


def F(src, n):
    return ScalarField.from_source(src, n)


def test_domain_parsing_round_trip():
    for spec in ("box:-1,-1:1,1", "ball:0,0,0:2.5", "box:0:1"):
        assert format_domain(parse_domain(spec)) == spec or \
            parse_domain(format_domain(parse_domain(spec))) == parse_domain(spec)
    with pytest.raises(ValueError):
        parse_domain("box:1,1:0,0")
    with pytest.raises(ValueError):
        parse_domain("ball:0,0:-1")
    with pytest.raises(ValueError):
        parse_domain("disc:0,0:1")


def test_domain_volume_and_contains():
    assert Box((0, 0), (2, 3)).volume == 6
    assert Ball((0, 0), 1.0).volume == pytest.approx(np.pi)
    b = Ball((0, 0), 1.0)
    assert list(b.contains(np.array([[0.5, 0.5], [1.0, 0.0], [1.0, 1.0]]))) == [True, True, False]


def test_quotient_is_zero_on_zero_set_and_matches_formula():
    f = F("x1^2 + x2^2", 2)
    X = np.array([[0.0, 0.0], [0.3, 0.4], [1.0, 1.0]])
    V = quotient_values(f, X)
    assert V[0] == 0.0
    r = np.linalg.norm(X[1:], axis=1)
    np.testing.assert_allclose(V[1:], 2 / r, rtol=1e-14)
    assert quotient_V(f, [0.3, 0.4]) == pytest.approx(4.0)


def test_quotient_scale_invariance_and_squaring():
    f = F("x1*exp(x2) + 0.2", 2)
    X = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    V = quotient_values(f, X)
    for c in (0.1, 3.0, -2.0):
        np.testing.assert_allclose(quotient_values(f.scaled(c), X), V, rtol=1e-14)
    np.testing.assert_allclose(quotient_values(square_field(f), X), 2 * V, rtol=1e-14)


def test_mapping_quotient_reduces_to_scalar():
    X = np.random.default_rng(1).uniform(-1, 1, (20, 2))
    m = VectorMapping.from_sources(["x1 + x2^2"], 2)
    expected = quotient_values(F("x1 + x2^2", 2), X)
    got = [mapping_quotient(m, x) for x in X]
    np.testing.assert_allclose(got, expected, rtol=1e-14)


def test_rescaled_field_chain_rule():
    f = F("sin(x1)*x2", 2)
    g = f.rescaled(np.array([0.5, -0.2]), 0.3)
    y = np.array([[0.1, 0.7]])
    v, G = g.values_and_grads(y)
    x = np.array([0.5, -0.2]) + 0.3 * y
    v0, G0 = f.values_and_grads(x)
    assert v[0] == v0[0]
    np.testing.assert_allclose(G, 0.3 * G0)


def _oracle_cells(resolution, lo, hi, contains_zero):
    """Enumerate cells whose closed bounds contain a zero, by geometry."""
    out = []
    w = (np.asarray(hi) - np.asarray(lo)) / resolution
    for i in range(resolution):
        for j in range(resolution):
            a = np.asarray(lo) + w * (i, j)
            if contains_zero(a, a + w):
                out.append((i, j))
    return out


def test_probe_line_off_grid_matches_geometry():
    f = F("x1 - 0.3", 2)
    rep = zero_set_probe(f, Box((-1, -1), (1, 1)), 8)
    expected = _oracle_cells(8, (-1, -1), (1, 1), lambda a, b: a[0] < 0.3 < b[0])
    assert sorted(rep.cells) == expected
    assert len(rep) == 8


def test_probe_half_open_cells_count_each_zero_once():
    assert len(zero_set_probe(F("x1", 2), Box((-1, -1), (1, 1)), 8)) == 8
    assert len(zero_set_probe(F("x1^2 + x2^2", 2), Box((-1, -1), (1, 1)), 8)) == 1
    assert len(zero_set_probe(F("2 + sin(x1)", 2), Box((-1, -1), (1, 1)), 8)) == 0
    assert len(zero_set_probe(F("x1", 2), Ball((0, 0), 1.0), 8)) == 8


def test_probe_top_face_owned_by_last_cell():
    rep = zero_set_probe(F("x1 - 1", 2), Box((-1, -1), (1, 1)), 4)
    assert sorted(rep.cells) == [(3, j) for j in range(4)]


def test_mcshane_interpolates_and_is_lipschitz():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (12, 2))
    vals = np.sin(pts[:, 0]) + 0.5 * pts[:, 1]   # Lipschitz constant <= sqrt(1.25)
    L = 1.2
    ext = mcshane_extend(list(zip(pts, vals)), L)
    np.testing.assert_allclose(ext.values(pts), vals, atol=1e-15)
    g = np.linspace(-1, 1, 25)
    G = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    v = ext.values(G)
    d = np.linalg.norm(G[:, None] - G[None], axis=2)
    dv = np.abs(v[:, None] - v[None])
    assert np.all(dv <= L * d + 1e-12)
    _, grads = ext.values_and_grads(G)
    assert np.all(np.linalg.norm(grads, axis=1) <= L * (1 + 1e-12))


def test_mcshane_rejects_incompatible_samples():
    with pytest.raises(IncompatibleSamplesError) as info:
        mcshane_extend([((0.0,), 0.0), ((1.0,), 2.0)], 1.0)
    assert info.value.pair == (0, 1)


def test_read_samples_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("x1,x2,value\n0,0,1\n1,0.5,2\n")
    s = read_samples_csv(p)
    assert len(s) == 2 and list(s[1][0]) == [1.0, 0.5] and s[1][1] == 2.0
    bad = tmp_path / "b.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_samples_csv(bad)
