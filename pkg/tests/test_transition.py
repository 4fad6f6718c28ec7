import json
import math

import numpy as np
import pytest

from cubeshadow.dynamics import Direction, builtin_map, eval_point, eval_points
from cubeshadow.errors import NoPathError, NotEndomorphismError, UncertainEdgesError
from cubeshadow.geometry import (
    Space,
    cube_of_point,
    cubes_containing_point,
    make_subdivision,
)
from cubeshadow.transition import (
    EdgeStatus,
    build_graph,
    delta_bound,
    find_path,
    strongly_connected,
)

CAT = builtin_map("toral [[2,1],[1,1]]")


def cat_graph(m, **kw):
    return build_graph(CAT, make_subdivision(2, m, Space.TORUS), **kw)


# --- edge counts ------------------------------------------------------------

def test_identity_m1_all_pairs_nonempty():
    # At m=1 on the torus every pair of the 4 cubes shares boundary, and the
    # identity fixes each cube, so all 16 ordered pairs are CertifiedNonempty.
    f = builtin_map("identity")
    g = build_graph(f, make_subdivision(2, 1, Space.TORUS))
    assert g.nonempty_count == 16
    assert g.uncertain_count == 0


@pytest.mark.parametrize("m,total", [(2, 192), (3, 768), (4, 3072)])
def test_cat_edge_counts(m, total):
    # The image of a cube is a parallelogram crossing exactly 12 cubes:
    # 4 with interior overlap and 8 touched only at corner points.
    g = cat_graph(m)
    assert g.nonempty_count == total
    assert g.uncertain_count == 0
    per_row = {}
    for (i, _j) in g.witnesses:
        per_row[i] = per_row.get(i, 0) + 1
    assert set(per_row.values()) == {12}


def test_cat_interior_witnesses_per_row():
    g = cat_graph(3)
    interior = {}
    for (i, _j), w in g.witnesses.items():
        interior[i] = interior.get(i, 0) + (1 if w.interior else 0)
    assert set(interior.values()) == {4}


# --- witness validity -------------------------------------------------------

def test_witnesses_check_out():
    g = cat_graph(3)
    s = g.subdivision
    for (i, j), w in g.witnesses.items():
        src_cubes = {s.flat_index(c.index) for c in cubes_containing_point(s, w.point)}
        img_cubes = {s.flat_index(c.index) for c in cubes_containing_point(s, w.image)}
        assert i in src_cubes
        assert j in img_cubes
        recomputed = eval_point(CAT, Direction.FORWARD, w.point)
        assert np.allclose(recomputed, w.image, atol=1e-12)
        assert w.clearance >= 0.0


def test_interior_witness_clearance_positive_both_sides():
    g = cat_graph(2)
    s = g.subdivision
    for (i, j), w in g.witnesses.items():
        if not w.interior:
            continue
        assert s.flat_index(cube_of_point(s, w.point).index) == i
        assert s.flat_index(cube_of_point(s, w.image).index) == j
        assert len(cubes_containing_point(s, w.point)) == 1
        assert len(cubes_containing_point(s, w.image)) == 1


# --- brute-force agreement --------------------------------------------------

def test_cat_m3_sampled_transitions_never_certified_empty():
    g = cat_graph(3)
    s = g.subdivision
    rng = np.random.default_rng(7)
    pts = rng.random((50_000, 2))
    imgs = eval_points(CAT, pts)
    seen = set()
    for p, q in zip(pts, imgs):
        i = s.flat_index(cube_of_point(s, p).index)
        j = s.flat_index(cube_of_point(s, q).index)
        seen.add((i, j))
    assert len(seen) >= 200
    for (i, j) in seen:
        assert g.status(i, j) is not EdgeStatus.EMPTY


# --- delta_bound ------------------------------------------------------------

def test_identity_m1_delta_bound_is_diameter():
    # No empty pair exists, so every defect is absorbed; the bound degrades
    # to the diameter of the torus.
    f = builtin_map("identity")
    g = build_graph(f, make_subdivision(2, 1, Space.TORUS))
    assert delta_bound(g) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)


def test_identity_m2_delta_bound_quarter():
    # Nearest empty pair sits one full cube away on one axis.
    f = builtin_map("identity")
    g = build_graph(f, make_subdivision(2, 2, Space.TORUS))
    db = delta_bound(g)
    assert db <= 0.25
    assert 0.25 - db < 1e-9


@pytest.mark.parametrize("m", [2, 3, 4])
def test_cat_delta_bound_matches_closed_form(m):
    # The nearest miss of the image parallelogram is at distance
    # cube_width / sqrt(5); the toolkit bound must sit just below it.
    g = cat_graph(m)
    db = delta_bound(g)
    true = g.subdivision.cube_width / math.sqrt(5)
    assert db <= true + 1e-12
    assert true - db < 2e-4 * g.subdivision.cube_width / 0.25


def test_delta_bound_never_exceeds_sampled_minimum():
    g = cat_graph(2)
    s = g.subdivision
    db = delta_bound(g)
    rng = np.random.default_rng(3)
    for (i, j), _gap in g.empty_gaps.items():
        box = s.box(i)
        pts = box.lo_arr + rng.random((500, 2)) * (box.hi_arr - box.lo_arr)
        imgs = eval_points(CAT, pts)
        tgt = s.box(j)
        from cubeshadow.geometry import point_box_distance_lb

        observed = min(point_box_distance_lb(p, tgt) for p in imgs)
        assert db <= observed + 1e-12


def test_delta_bound_uncertain_strictness():
    # Without refinement the 8 near-miss pairs per row stay Uncertain: their
    # bounding-box enclosures overlap the target even though the true image
    # parallelogram misses it.
    g = cat_graph(2, refine_depth=0)
    assert g.uncertain_count > 0
    with pytest.raises(UncertainEdgesError):
        delta_bound(g)
    assert delta_bound(g, allow_uncertain=True) > 0.0


# --- endomorphism gate ------------------------------------------------------

def test_translation_on_cube_rejected():
    f = builtin_map("translation [0.3,0.7]", space=Space.CUBE)
    with pytest.raises(NotEndomorphismError):
        build_graph(f, make_subdivision(2, 2, Space.CUBE))


def test_contraction_on_cube_accepted_but_not_strongly_connected():
    f = builtin_map("affine [[0.5,0],[0,0.5]]", space=Space.CUBE)
    g = build_graph(f, make_subdivision(2, 2, Space.CUBE))
    assert g.nonempty_count > 0
    assert not strongly_connected(g)


def test_cat_strongly_connected():
    assert strongly_connected(cat_graph(2))


# --- paths ------------------------------------------------------------------

def test_find_path_trivial_and_direct():
    g = cat_graph(2)
    assert find_path(g, 5, 5) == [5]
    first = next(j for j in g.successors(0) if j != 0)
    assert find_path(g, 0, first) == [0, first]


def test_find_path_and_verify_edges():
    g = cat_graph(3)
    path = find_path(g, 0, 37)
    assert path[0] == 0 and path[-1] == 37
    for a, b in zip(path, path[1:]):
        assert g.status(a, b) is EdgeStatus.NONEMPTY


def test_find_path_respects_max_len():
    g = cat_graph(2)
    non_neighbors = [j for j in range(16) if j != 0 and j not in g.successors(0)]
    assert non_neighbors  # 12 of 16 are direct successors
    with pytest.raises(NoPathError):
        find_path(g, 0, non_neighbors[0], max_len=1)


def test_find_path_bad_index():
    g = cat_graph(2)
    with pytest.raises(ValueError):
        find_path(g, 0, 16)


# --- determinism and export -------------------------------------------------

def test_build_is_deterministic():
    a = cat_graph(2)
    b = cat_graph(2)
    assert a == b
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(
        b.to_json(), sort_keys=True
    )


def test_json_export_shape():
    g = cat_graph(2)
    doc = g.to_json()
    assert doc["m"] == 2 and doc["n"] == 2
    assert doc["empty_pairs"] == "implicit"
    assert len(doc["edges"]) == g.nonempty_count + g.uncertain_count
    assert doc["min_empty_gap"] == pytest.approx(delta_bound(g))
    json.dumps(doc)  # must be serializable as-is


def test_dot_export_mentions_edges():
    g = build_graph(builtin_map("identity"), make_subdivision(2, 1, Space.TORUS))
    dot = g.to_dot()
    assert dot.startswith("digraph")
    assert "0 -> 0;" in dot
