import numpy as np
import pytest

from cubeshadow.dynamics import (
    Direction,
    affine_map,
    builtin_map,
    eval_point,
    identity_map,
)
from cubeshadow.errors import NotHyperbolicError
from cubeshadow.geometry import Box, Space
from cubeshadow.oracle import (
    brute_force_fixed_points,
    brute_force_shadow,
    hyperbolic_splitting,
    linear_shadow,
)
from cubeshadow.shadowing import (
    Drift,
    UniformNoise,
    generate_pseudo_orbit,
    pseudo_orbit,
)

CAT = builtin_map("toral [[2,1],[1,1]]")
SPLIT = hyperbolic_splitting(CAT)
TORUS_SQUARE = Box((0.0, 0.0), (1.0, 1.0), Space.TORUS)


def doubling_orbit(length=101):
    """y_{k+1} = 2 y_k + 1/4 mod 1, seeded on a coarse dyadic grid.

    Every point stays a multiple of 2^-40, so each float step and each
    lifted error is exact and the shadow construction can be checked
    bitwise.
    """
    f = affine_map([[2.0]], space=Space.TORUS)
    y, ys = round(0.1 * 2 ** 40) / 2 ** 40, []
    for _ in range(length):
        ys.append((y,))
        y = (2.0 * y + 0.25) % 1.0
    return f, pseudo_orbit(f, ys, 0.2500001)


# --- eigen splitting ---------------------------------------------------------

def test_splitting_of_the_cat_map():
    assert SPLIT.lam_u == pytest.approx((3 + 5 ** 0.5) / 2, abs=1e-12)
    assert SPLIT.lam_s == pytest.approx((3 - 5 ** 0.5) / 2, abs=1e-12)
    assert abs(SPLIT.lam_u * SPLIT.lam_s) == pytest.approx(1.0, abs=1e-12)
    a = np.array(SPLIT.matrix)
    basis = np.array(SPLIT.basis)
    for j, lam in enumerate(SPLIT.eigenvalues):
        assert np.max(np.abs(a @ basis[:, j] - lam * basis[:, j])) < 1e-12
        assert np.linalg.norm(basis[:, j]) == pytest.approx(1.0, abs=1e-12)
    prod = np.array(SPLIT.basis_inv) @ basis
    assert np.max(np.abs(prod - np.eye(2))) < 1e-12


def test_splitting_rejects_unit_and_complex_spectrum():
    with pytest.raises(NotHyperbolicError):
        hyperbolic_splitting(identity_map(2))
    with pytest.raises(NotHyperbolicError):
        hyperbolic_splitting(builtin_map("standard k=0.3"))  # shear spectrum {1,1}
    with pytest.raises(NotHyperbolicError):
        hyperbolic_splitting(affine_map([[0.0, -1.0], [1.0, 0.0]]))


def test_one_dimensional_splitting_has_no_stable_part():
    split = hyperbolic_splitting(affine_map([[2.0]], space=Space.TORUS))
    assert split.eigenvalues == (2.0,)
    assert split.v_s is None
    assert split.lam_s == 0.0


# --- closed-form linear shadow -----------------------------------------------

def test_doubling_constant_error_shadow_is_the_translate():
    f, p = doubling_orbit()
    sh = linear_shadow(hyperbolic_splitting(f), p)
    # far enough from the free future edge the correction saturates at
    # exactly the error constant; near the edge it decays to the pinned zero
    for k in range(0, 47):
        assert sh.points[k][0] == (p.points[k][0] + 0.25) % 1.0
    assert sh.points[-1][0] == p.points[-1][0]
    assert sh.truncation_bound == pytest.approx(0.25, abs=1e-12)


def test_doubling_shadow_is_a_true_orbit():
    f, p = doubling_orbit()
    sh = linear_shadow(hyperbolic_splitting(f), p)
    for k in range(len(sh.points) - 1):
        img = float(eval_point(f, Direction.FORWARD, sh.points[k])[0])
        gap = abs(img - sh.points[k + 1][0])
        assert min(gap, 1.0 - gap) < sh.truncation_bound + 1e-10


def test_zero_error_pseudo_orbit_needs_no_correction():
    p = generate_pseudo_orbit(CAT, (0.2, 0.3), 0.0, 20, UniformNoise(0))
    sh = linear_shadow(SPLIT, p)
    assert sh.max_error == 0.0
    assert sh.points == p.points


def test_noisy_cat_shadow_obeys_geometric_bounds():
    p = generate_pseudo_orbit(CAT, (0.2, 0.3), 1e-4, 100, UniformNoise(3))
    sh = linear_shadow(SPLIT, p)
    assert sh.window == (-100, 100)
    assert sh.coord_sup[0] == pytest.approx(5.0373392540194835e-05, abs=1e-15)
    assert sh.coord_sup[1] == pytest.approx(1.1842544872426404e-04, abs=1e-15)
    assert sh.max_error == pytest.approx(1.1887198793951526e-04, abs=1e-15)
    # each eigen component is a geometric series in errors of size < delta
    assert sh.coord_sup[0] <= p.delta / (SPLIT.lam_u - 1.0) + 1e-15
    assert sh.coord_sup[1] <= p.delta / (1.0 - SPLIT.lam_s) + 1e-15


def test_noisy_cat_shadow_conjugates_to_rounding():
    p = generate_pseudo_orbit(CAT, (0.2, 0.3), 1e-4, 100, UniformNoise(3))
    sh = linear_shadow(SPLIT, p)
    for k in range(len(sh.points) - 1):
        img = np.asarray(eval_point(CAT, Direction.FORWARD, sh.points[k]))
        d = (img - np.asarray(sh.points[k + 1]) + 0.5) % 1.0 - 0.5
        assert float(np.linalg.norm(d)) <= sh.truncation_bound + 1e-10


def test_linear_shadow_serialization():
    p = generate_pseudo_orbit(CAT, (0.2, 0.3), 1e-4, 10, UniformNoise(3))
    sh = linear_shadow(SPLIT, p)
    data = sh.to_json()
    assert data["source"] == "oracle"
    assert data["window"] == [-10, 10]
    lines = sh.to_csv(p).splitlines()
    assert lines[0] == "k,y_1,y_2,x_1,x_2,err"
    assert len(lines) == 22
    assert lines[1].startswith("-10,")


# --- brute-force searches ----------------------------------------------------

def test_brute_force_finds_the_unique_fixed_point():
    found = brute_force_fixed_points(CAT, TORUS_SQUARE, 1, 64)
    assert not found.degenerate
    assert len(found.points) == 1
    assert found.points[0] == pytest.approx((0.0, 0.0), abs=1e-8)


def test_brute_force_period_counts_match_determinants():
    # |det(A^P - I)| counts the period-P lattice classes: 1, 5, 16
    for period, expect in ((1, 1), (2, 5), (3, 16)):
        found = brute_force_fixed_points(CAT, TORUS_SQUARE, period, 64)
        assert len(found.points) == expect
        assert max(found.residuals) <= 1e-6


def test_brute_force_two_cycles_sit_on_fifths():
    found = brute_force_fixed_points(CAT, TORUS_SQUARE, 2, 64)
    expect = [(0.0, 0.0), (0.2, 0.4), (0.4, 0.8), (0.6, 0.2), (0.8, 0.6)]
    for got, want in zip(found.points, expect):
        assert got == pytest.approx(want, abs=1e-7)


def test_identity_map_is_flagged_degenerate():
    found = brute_force_fixed_points(identity_map(2), TORUS_SQUARE, 1, 32)
    assert found.degenerate
    assert found.points == ()


def test_brute_shadow_matches_oracle_on_a_forward_window():
    # one-sided window: a backward half would amplify stable offsets by
    # lam_u^N, putting the optimum below any affordable lattice pitch
    gen = generate_pseudo_orbit(CAT, (0.2, 0.3), 1e-3, 10, UniformNoise(1))
    p = pseudo_orbit(CAT, gen.points[10:], 1e-3, lo=0)
    oracle = linear_shadow(SPLIT, p)
    brute = brute_force_shadow(CAT, p, 512, 0.005)
    assert brute.window == (0, 10)
    assert brute.max_err == pytest.approx(1.0368861928292674e-03, abs=1e-15)
    assert 0.5 <= brute.max_err / oracle.max_error <= 2.0


def test_brute_shadow_on_a_true_orbit_stays_near_the_seed():
    p = generate_pseudo_orbit(CAT, (0.2, 0.3), 0.0, 6, UniformNoise(0))
    brute = brute_force_shadow(CAT, p, 32, 0.01)
    half_diag = (2 * 0.01 / 32) * 2 ** 0.5 / 2
    assert brute.max_err <= SPLIT.lam_u ** 6 * half_diag
    assert np.linalg.norm(np.array(brute.point) - (0.2, 0.3)) <= brute.max_err


def test_brute_shadow_confirms_drift_is_unshadowable():
    ident = identity_map(2)
    p = generate_pseudo_orbit(ident, (0.5, 0.5), 0.01, 10, Drift((1.0, 0.0)))
    brute = brute_force_shadow(ident, p, 64, 0.02)
    # a static point can do no better than sitting at the drift's midpoint
    assert brute.max_err == pytest.approx(0.1, abs=1e-3)
    assert brute.point == pytest.approx((0.5, 0.5), abs=1e-3)
