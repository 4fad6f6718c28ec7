"""Pseudo-orbits, itineraries, and certified finite-window shadowing.

The pipeline: generate (or splice) a pseudo-orbit, read off its cube
itinerary against a transition graph, erect a chain of covering
rectangles anchored at the pseudo-orbit points, and localize the true
orbit threading them.  For the exactly-affine map kinds the final point
is solved in closed form over the rationals, because a float orbit is
meaningless at these window lengths: the expanding eigenvalue amplifies
one ulp past unit size within a few dozen steps, so any point meant to
be iterated 100 steps must be exact from the start.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .covering import (
    ChainedCertificate,
    CoveringCertificate,
    CoveringConfig,
    Rectangle,
    check_covering,
    expansion_frame,
)
from .dynamics import Direction, MapSpec, eval_box, eval_point, jacobian
from .errors import (
    BrokenChainError,
    DeltaTooLargeError,
    FixedPointTolUnreachedError,
    NoSurvivingCellError,
    NotHyperbolicError,
    NotInvertibleError,
    UncertifiedTransitionError,
)
from .exact import (
    eigen_directions,
    exact_step,
    frac,
    frac_vec,
    fraction_inverse,
    minimal_period,
    nearest_lift,
    supports_exact,
    torus_reduce,
)
from .geometry import Box, Space, Subdivision, cube_of_point
from .transition import EdgeStatus, TransitionGraph, build_graph, delta_bound, find_path


def _cube_index(s: Subdivision, y) -> int:
    return s.flat_index(cube_of_point(s, y).index)


# --- perturbation modes -----------------------------------------------------

@dataclass(frozen=True)
class RoundToGrid:
    """Snap every image to the dyadic 2^-m grid (roundoff-style noise)."""

    m: int


@dataclass(frozen=True)
class UniformNoise:
    """Seeded uniform noise in the ball of radius just under delta."""

    seed: int


@dataclass(frozen=True)
class Drift:
    """Constant push of norm just under delta in a fixed direction."""

    direction: tuple[float, ...]


_HEADROOM = 1.0 - 1e-6


# --- pseudo-orbits ----------------------------------------------------------

@dataclass(frozen=True)
class PseudoOrbit:
    """A delta-pseudo-orbit: consecutive images miss by less than delta.

    ``points[j]`` holds the orbit point at time ``lo + j``.  Periodic
    orbits are indexed from 0 and store whole periods; the wrap step obeys
    the same defect bound.  Construct through pseudo_orbit() or
    generate_pseudo_orbit(), which verify the bound against the map; the
    dataclass itself checks shape only.

    ``known_itinerary``: spliced orbits carry their cube sequence
    explicitly because their delta is deliberately cube-scale, far above
    any graph separation bound; itinerary() validates it by membership
    instead of applying the delta gate.
    """

    points: tuple[tuple[float, ...], ...]
    delta: float
    space: Space
    lo: int = 0
    periodic: int | None = None
    known_itinerary: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("pseudo-orbit needs at least one point")
        n = len(self.points[0])
        if any(len(p) != n for p in self.points):
            raise ValueError("pseudo-orbit points must share one dimension")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.periodic is not None:
            if self.periodic < 1 or len(self.points) % self.periodic:
                raise ValueError("period must be >= 1 and divide the length")
            if self.lo != 0:
                raise ValueError("periodic pseudo-orbits are indexed from 0")

    @property
    def n(self) -> int:
        return len(self.points[0])

    @property
    def hi(self) -> int:
        return self.lo + len(self.points) - 1

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    def point(self, k: int) -> tuple[float, ...]:
        if self.periodic is not None:
            return self.points[k % len(self.points)]
        if not (self.lo <= k <= self.hi):
            raise IndexError(f"time {k} outside window {self.window}")
        return self.points[k - self.lo]

    def to_json(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "delta": self.delta,
            "space": self.space.value,
            "lo": self.lo,
            "periodic": self.periodic,
            "known_itinerary": (
                None if self.known_itinerary is None else list(self.known_itinerary)
            ),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["k"] + [f"y_{d + 1}" for d in range(self.n)])
        for j, p in enumerate(self.points):
            writer.writerow([self.lo + j] + [repr(v) for v in p])
        return buf.getvalue()


def pseudo_orbit_from_json(data: dict) -> PseudoOrbit:
    itin = data.get("known_itinerary")
    return PseudoOrbit(
        points=tuple(tuple(float(v) for v in p) for p in data["points"]),
        delta=float(data["delta"]),
        space=Space(data["space"]),
        lo=int(data.get("lo", 0)),
        periodic=data.get("periodic"),
        known_itinerary=None if itin is None else tuple(itin),
    )


def _dist(space: Space, a, b) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if space is Space.TORUS:
        d = (d + 0.5) % 1.0 - 0.5
    return float(np.linalg.norm(d))


def step_defects(f: MapSpec, p: PseudoOrbit) -> list[float]:
    """dist(f(y_k), y_{k+1}) for every stored step (cyclic if periodic)."""
    pts = list(p.points)
    pairs = list(zip(pts, pts[1:]))
    if p.periodic is not None:
        pairs.append((pts[-1], pts[0]))
    return [
        _dist(p.space, eval_point(f, Direction.FORWARD, a), b) for a, b in pairs
    ]


def pseudo_orbit(
    f: MapSpec,
    points,
    delta: float,
    lo: int = 0,
    periodic: int | None = None,
    known_itinerary=None,
) -> PseudoOrbit:
    """Construct a PseudoOrbit, verifying the defect bound at every step."""
    p = PseudoOrbit(
        points=tuple(tuple(float(v) for v in q) for q in points),
        delta=float(delta),
        space=f.space,
        lo=lo,
        periodic=periodic,
        known_itinerary=None if known_itinerary is None else tuple(known_itinerary),
    )
    defects = step_defects(f, p)
    worst = max(defects, default=0.0)
    ok = worst == 0.0 if p.delta == 0.0 else worst < p.delta
    if defects and not ok:
        raise ValueError(
            f"step defect {worst} is not below the stated delta {p.delta}"
        )
    return p


def _unit(direction) -> np.ndarray:
    v = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0:
        raise ValueError("drift direction must be nonzero")
    return v / norm


def _wrap(space: Space, q: np.ndarray) -> np.ndarray:
    if space is Space.TORUS:
        q = q - np.floor(q)
        q[q == 1.0] = 0.0
    return q


def generate_pseudo_orbit(
    f: MapSpec,
    x0,
    delta: float,
    N: int,
    mode,
) -> PseudoOrbit:
    """Run the map N steps with per-step perturbation in the chosen mode.

    Invertible maps get a two-sided window [-N, N]; others (and the exact
    delta = 0 orbit, whose float inverse would leave roundtrip residue)
    get [0, N].  Backward points are chosen so the defining forward
    inequality holds by construction: y_prev = f^-1(y - perturbation).
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if N < 1:
        raise ValueError("N must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    if len(x0) != f.n:
        raise ValueError(f"x0 has dimension {len(x0)}, map needs {f.n}")
    rng = (
        np.random.default_rng(mode.seed) if isinstance(mode, UniformNoise) else None
    )
    delta_eff = delta * _HEADROOM

    def noise_vec() -> np.ndarray:
        if isinstance(mode, Drift):
            return delta_eff * _unit(mode.direction)
        vec = rng.normal(size=f.n)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return np.zeros(f.n)
        return vec / norm * delta_eff * rng.random() ** (1.0 / f.n)

    def snap(q: np.ndarray) -> np.ndarray:
        grid = float(2 ** mode.m)
        return np.round(q * grid) / grid

    forward = [tuple(x0)]
    y = x0
    for _ in range(N):
        img = eval_point(f, Direction.FORWARD, y)
        if delta == 0.0:
            y = img
        elif isinstance(mode, RoundToGrid):
            y = _wrap(f.space, snap(img))
        else:
            y = _wrap(f.space, img + noise_vec())
        forward.append(tuple(y))

    backward: list[tuple[float, ...]] = []
    if f.invertible and delta > 0.0:
        y = x0
        for _ in range(N):
            if isinstance(mode, RoundToGrid):
                prev = snap(eval_point(f, Direction.INVERSE, y))
            else:
                prev = eval_point(f, Direction.INVERSE, y - noise_vec())
            prev = _wrap(f.space, np.asarray(prev, dtype=float))
            backward.append(tuple(prev))
            y = prev
        backward.reverse()

    p = PseudoOrbit(
        points=tuple(backward) + tuple(forward),
        delta=delta,
        space=f.space,
        lo=-len(backward),
    )
    defects = step_defects(f, p)
    worst = max(defects, default=0.0)
    ok = worst == 0.0 if delta == 0.0 else worst < delta
    if not ok:
        raise ValueError(
            f"mode {mode!r} produced step defect {worst}, not below delta {delta}; "
            "grid snapping needs delta above the grid half-diagonal times the "
            "map's expansion"
        )
    return p


# --- itineraries ------------------------------------------------------------

@dataclass(frozen=True)
class Itinerary:
    """Cube indices visited by a pseudo-orbit, aligned with its window."""

    indices: tuple[int, ...]
    subdivision: Subdivision
    lo: int = 0
    periodic: int | None = None

    def index(self, k: int) -> int:
        if self.periodic is not None:
            return self.indices[k % len(self.indices)]
        return self.indices[k - self.lo]

    def to_json(self) -> dict:
        return {
            "indices": list(self.indices),
            "m": self.subdivision.m,
            "n": self.subdivision.n,
            "space": self.subdivision.space.value,
            "lo": self.lo,
            "periodic": self.periodic,
        }


def itinerary(p: PseudoOrbit, s: Subdivision, g: TransitionGraph) -> Itinerary:
    """Cube sequence of the pseudo-orbit, validated against the graph.

    With delta below the graph's separation bound, consecutive cubes
    cannot form a provably-empty pair; if one does anyway the graph is
    unsound and BrokenChainError reports it.  A pseudo-orbit carrying an
    explicit known_itinerary skips the gate and validates membership.
    """
    if s.space is not p.space:
        raise ValueError("subdivision and pseudo-orbit live on different spaces")
    if p.known_itinerary is not None:
        idx = p.known_itinerary
        if len(idx) != len(p.points):
            raise ValueError("known itinerary length mismatch")
        for j, (i, y) in enumerate(zip(idx, p.points)):
            if not s.box(i).contains_point(y, tol=1e-12):
                raise BrokenChainError(f"point {j} is not in its declared cube {i}")
    else:
        bound = delta_bound(g)
        if not p.delta < bound:
            raise DeltaTooLargeError(
                f"delta {p.delta} is not below the separation bound {bound}"
            )
        idx = tuple(_cube_index(s, y) for y in p.points)
    pairs = list(zip(idx, idx[1:]))
    if p.periodic is not None:
        pairs.append((idx[-1], idx[0]))
    for j, (a, b) in enumerate(pairs):
        if g.status(a, b) is EdgeStatus.EMPTY:
            raise BrokenChainError(
                f"itinerary step {j} crosses edge ({a}, {b}) certified empty"
            )
    return Itinerary(
        indices=tuple(idx), subdivision=s, lo=p.lo, periodic=p.periodic
    )


# --- per-step covering chains -----------------------------------------------

@dataclass(frozen=True)
class ShadowConfig:
    depth: int = 96               # max bisection splits at the window center
    cell_floor: float = 1e-12     # stop splitting below this cell width
    fp_tol: float = 1e-9          # periodic fixed-point residual tolerance
    radius_factor: float = 2.5    # tracking tube radius in units of delta
    delta_floor: float = 1e-7     # effective delta for near-exact orbits
    margin_pad: float = 0.2       # chain margin in units of the worst defect
    min_margin: float = 1e-12


@dataclass(frozen=True)
class StepChain:
    """Covering rectangles anchored at the pseudo-orbit points."""

    rectangles: tuple[Rectangle, ...]
    certificates: tuple[CoveringCertificate, ...]
    frame: tuple[tuple[float, ...], ...]

    @property
    def min_margin(self) -> float:
        return min(
            min(c.exit_margin, c.confinement_margin) for c in self.certificates
        )


def _lifted_defects(f: MapSpec, p: PseudoOrbit) -> list[np.ndarray]:
    """Nearest-lift step errors f(y_k) - y_{k+1} (cyclic when periodic)."""
    pts = [np.asarray(q, dtype=float) for q in p.points]
    nxt = pts[1:] + ([pts[0]] if p.periodic is not None else [])
    out = []
    for a, b in zip(pts, nxt):
        d = eval_point(f, Direction.FORWARD, a) - b
        if p.space is Space.TORUS:
            d = (d + 0.5) % 1.0 - 0.5
        out.append(d)
    return out


def _chain_half_widths(
    lam_u: float,
    lam_s: float,
    du: list[float],
    ds: list[float],
    pad: float,
    cyclic: bool,
) -> tuple[list[float], list[float]]:
    """Per-step strip half-widths leaving every covering margin >= pad.

    Exit wants lam_u*hu[k] - du[k] >= hu[k+1] + pad; confinement wants
    lam_s*hs[k] + ds[k] <= hs[k+1] - pad.  The sweeps meet both with
    equality-plus-pad and converge geometrically in the cyclic case.
    """
    steps = len(du)
    count = steps if cyclic else steps + 1
    hu = [pad / (lam_u - 1.0)] * count
    hs = [pad / (1.0 - lam_s)] * count
    for _ in range(200):
        changed = False
        for k in range(steps - 1, -1, -1):
            need = (hu[(k + 1) % count] + du[k] + pad) / lam_u
            if need > hu[k] * (1.0 + 1e-15):
                hu[k] = need
                changed = True
        for k in range(steps):
            need = lam_s * hs[k] + ds[k] + pad
            if need > hs[(k + 1) % count] * (1.0 + 1e-15):
                hs[(k + 1) % count] = need
                changed = True
        if not changed:
            break
    return hu, hs


def step_chain(
    f: MapSpec, p: PseudoOrbit, cfg: ShadowConfig | None = None
) -> StepChain:
    """Build and verify the covering chain along the pseudo-orbit.

    Rectangle k is eigen-aligned and centered at y_k; every consecutive
    pair (cyclically for periodic orbits) is re-checked with interval
    arithmetic rather than trusted from the sizing recursion.
    """
    cfg = cfg or ShadowConfig()
    frame_info = expansion_frame(f)
    if frame_info is None:
        raise UncertifiedTransitionError(
            f"{f.descriptor} has no real expanding/contracting splitting"
        )
    rows, vals = frame_info
    lam_u, lam_s = abs(float(vals[0])), abs(float(vals[-1]))
    if lam_u <= 1.0 + 1e-9 or lam_s >= 1.0 - 1e-9:
        raise UncertifiedTransitionError(
            f"{f.descriptor} is not hyperbolic, covering chains cannot close"
        )
    defects = _lifted_defects(f, p)
    row_u, row_s = np.asarray(rows[0]), np.asarray(rows[-1])
    du = [abs(float(row_u @ d)) for d in defects]
    ds = [abs(float(row_s @ d)) for d in defects]
    pad = cfg.margin_pad * max(max(du + ds, default=0.0), cfg.delta_floor)
    hu, hs = _chain_half_widths(
        lam_u, lam_s, du, ds, pad, cyclic=p.periodic is not None
    )
    frame = tuple(tuple(float(v) for v in row) for row in np.asarray(rows))
    rects = []
    for y, a, b in zip(p.points, hu, hs):
        # Exit axis first: expansion_frame orders rows by |eigenvalue| desc.
        half = np.empty(len(y))
        half[0], half[-1] = a, b
        if len(y) > 2:
            half[1:-1] = max(a, b)
        lo = tuple(float(c - h) for c, h in zip(y, half))
        hi = tuple(float(c + h) for c, h in zip(y, half))
        rects.append(Rectangle(Box(lo, hi, p.space), 0, 1, frame))
    ccfg = CoveringConfig(min_margin=cfg.min_margin)
    pairs = list(zip(rects, rects[1:]))
    if p.periodic is not None:
        pairs.append((rects[-1], rects[0]))
    certs = []
    for k, (src, dst) in enumerate(pairs):
        res = check_covering(f, src, dst, ccfg)
        if not isinstance(res, CoveringCertificate):
            raise UncertifiedTransitionError(
                f"step {p.lo + k}: covering of the next strip failed ({res.reason})"
            )
        certs.append(res)
    return StepChain(
        rectangles=tuple(rects), certificates=tuple(certs), frame=frame
    )


# --- bisection localizer ----------------------------------------------------

def _make_stepper(f: MapSpec, direction: Direction):
    """Interval step (lo, hi) -> image (lo, hi); fast path for affine kinds."""
    if f.matrix is not None and f.kind.value in ("toral", "affine"):
        if direction is Direction.FORWARD:
            mat, off = f.matrix_arr, f.offset_arr
        else:
            mat = f.inverse_matrix_arr
            off = -(mat @ f.offset_arr)
        pos, neg = np.maximum(mat, 0.0), np.minimum(mat, 0.0)

        def step(lo: np.ndarray, hi: np.ndarray):
            return pos @ lo + neg @ hi + off, pos @ hi + neg @ lo + off

        return step

    space = f.space

    def step(lo: np.ndarray, hi: np.ndarray):
        img = eval_box(f, direction, Box(tuple(lo), tuple(hi), space))
        return img.lo_arr, img.hi_arr

    return step


def _window_times(f: MapSpec, p: PseudoOrbit) -> tuple[list[int], list[int]]:
    """Constraint times for localization around time 0 (cyclic twice over)."""
    if p.periodic is not None:
        span = 2 * len(p.points)
        fwd = list(range(1, span + 1))
        bwd = list(range(-1, -span - 1, -1)) if f.invertible else []
        return fwd, bwd
    return list(range(1, p.hi + 1)), list(range(-1, p.lo - 1, -1))


def _interval_dot(row: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    a = float(np.minimum(row * lo, row * hi).sum())
    b = float(np.maximum(row * lo, row * hi).sum())
    return a, b


def _eigen_bands(
    f: MapSpec,
    p: PseudoOrbit,
    r: float,
    seed_box: Box | None,
) -> tuple | None:
    """Sharp survival test in the eigenframe of an exactly-affine 2D map.

    In eigen coordinates the deviation from the pseudo-orbit obeys two
    decoupled scalar affine recursions, so the tube constraint at each
    time pulls back to an exact interval condition on the time-0
    coordinates: no interval wrapping, pruning stays informative at
    every depth.  Forward constraints pin the expanding coordinate,
    backward ones the contracting coordinate; the opposite pullbacks
    only widen and are dropped.  Returns (basis, u-interval, s-interval,
    initial eigen cell) or None when the frame is unavailable.
    """
    if p.n != 2 or not supports_exact(f):
        return None
    eig = eigen_directions(f)
    if eig is None:
        return None
    basis = np.array(
        [[float(v) for v in eig.row_u], [float(v) for v in eig.row_s]]
    ).T
    lam_u, lam_s = float(eig.lam_u), float(eig.lam_s)
    functionals = np.linalg.inv(basis)
    defects = _lifted_defects(f, p)
    y0 = np.asarray(p.point(0), dtype=float)

    def tube(k: int) -> tuple[np.ndarray, np.ndarray]:
        # deviation bounds at time k, axis coordinates
        g_lo, g_hi = np.full(p.n, -r), np.full(p.n, r)
        if k == 0 and seed_box is not None:
            g_lo = np.maximum(g_lo, seed_box.lo_arr - y0)
            g_hi = np.minimum(g_hi, seed_box.hi_arr - y0)
        if p.space is Space.CUBE:
            tgt = np.asarray(p.point(k), dtype=float)
            g_lo = np.maximum(g_lo, -tgt)
            g_hi = np.minimum(g_hi, 1.0 - tgt)
        return g_lo, g_hi

    def defect(k: int) -> np.ndarray:
        # step defect e_k for the step k -> k+1, window- or cycle-indexed
        if p.periodic is not None:
            return defects[k % len(defects)]
        return defects[k - p.lo]

    fwd_times, bwd_times = _window_times(f, p)
    g0_lo, g0_hi = tube(0)
    if np.any(g0_lo > g0_hi):
        return basis, (1.0, -1.0), (1.0, -1.0), (g0_lo, g0_hi)
    u_cell = _interval_dot(functionals[0], g0_lo, g0_hi)
    s_cell = _interval_dot(functionals[1], g0_lo, g0_hi)
    u_int, s_int = u_cell, s_cell

    # u_k = lam_u^k u_0 + c_k with c_{k+1} = lam_u c_k + <l_u, e_k>
    coef, c = 1.0, 0.0
    for k in fwd_times:
        c = lam_u * c + float(functionals[0] @ defect(k - 1))
        coef *= lam_u
        if not math.isfinite(coef) or abs(coef) > 1e120:
            break
        g_lo, g_hi = tube(k)
        b_lo, b_hi = _interval_dot(functionals[0], g_lo, g_hi)
        lo_k, hi_k = sorted(((b_lo - c) / coef, (b_hi - c) / coef))
        pad = 1e-12 * (abs(lo_k) + abs(hi_k)) + 1e-17
        u_int = (max(u_int[0], lo_k - pad), min(u_int[1], hi_k + pad))
        if u_int[0] > u_int[1]:
            break

    # s_{-k} = lam_s^-k s_0 + c_k with c_{k-1} = (c_k - <l_s, e_{k-1}>)/lam_s
    coef, c = 1.0, 0.0
    for k in bwd_times:
        c = (c - float(functionals[1] @ defect(k))) / lam_s
        coef /= lam_s
        if not math.isfinite(coef) or abs(coef) > 1e120:
            break
        g_lo, g_hi = tube(k)
        b_lo, b_hi = _interval_dot(functionals[1], g_lo, g_hi)
        lo_k, hi_k = sorted(((b_lo - c) / coef, (b_hi - c) / coef))
        pad = 1e-12 * (abs(lo_k) + abs(hi_k)) + 1e-17
        s_int = (max(s_int[0], lo_k - pad), min(s_int[1], hi_k + pad))
        if s_int[0] > s_int[1]:
            break

    return basis, u_int, s_int, u_cell + s_cell


def _bisect_cell(
    f: MapSpec,
    p: PseudoOrbit,
    r: float,
    cfg: ShadowConfig,
    seed_box: Box | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Refine the time-0 cell against the window's tracking tubes.

    A cell survives while its orbit enclosure meets every tube
    [y_k +- r]: forward images for k > 0, inverse images for k < 0
    (cyclically extended twice over for periodic orbits, which pins both
    eigendirections around the loop).  Exactly-affine 2D maps get the
    sharp eigenframe test; other kinds fall back to stepwise interval
    propagation, whose wrapping blurs but never unsoundly prunes.
    """
    bands = _eigen_bands(f, p, r, seed_box)
    if bands is not None:
        return _bisect_eigen(p, bands, cfg, r, seed_box)
    return _bisect_axis(f, p, r, cfg, seed_box)


def _bisect_eigen(
    p: PseudoOrbit,
    bands,
    cfg: ShadowConfig,
    r: float,
    seed_box: Box | None,
) -> tuple[np.ndarray, np.ndarray, int]:
    basis, u_int, s_int, cell0 = bands
    if u_int[0] > u_int[1] or s_int[0] > s_int[1]:
        raise NoSurvivingCellError(
            "tracking tube constraints are incompatible; no orbit survives",
            deepest_surviving_depth=0,
        )
    cell = [list(cell0[:2]), list(cell0[2:])]
    feasible = (u_int, s_int)

    def survives(c) -> bool:
        return all(
            c[i][0] <= feasible[i][1] and c[i][1] >= feasible[i][0]
            for i in range(2)
        )

    if not survives(cell):
        raise NoSurvivingCellError(
            "tracking tube is empty at the requested radius",
            deepest_surviving_depth=0,
        )
    splits = 0
    floor = max(cfg.cell_floor, 4e-14)
    for _ in range(cfg.depth):
        widths = [c[1] - c[0] for c in cell]
        axis = widths.index(max(widths))
        if widths[axis] <= floor:
            break
        mid = 0.5 * (cell[axis][0] + cell[axis][1])
        lower = [list(c) for c in cell]
        lower[axis][1] = mid
        if survives(lower):
            cell = lower
        else:
            upper = [list(c) for c in cell]
            upper[axis][0] = mid
            cell = upper
        splits += 1
    y0 = np.asarray(p.point(0), dtype=float)
    corners = [
        y0 + basis @ np.array([u, s])
        for u in cell[0]
        for s in cell[1]
    ]
    lo = np.min(corners, axis=0)
    hi = np.max(corners, axis=0)
    # The eigen cell's axis hull can poke past the constraint boxes it was
    # carved from; clamp so seeded surviving boxes nest.
    lo, hi = np.maximum(lo, y0 - r), np.minimum(hi, y0 + r)
    if seed_box is not None:
        lo = np.maximum(lo, seed_box.lo_arr)
        hi = np.minimum(hi, seed_box.hi_arr)
    if p.space is Space.CUBE:
        lo, hi = np.maximum(lo, 0.0), np.minimum(hi, 1.0)
    lo = np.minimum(lo, hi)
    return lo, hi, splits


def _bisect_axis(
    f: MapSpec,
    p: PseudoOrbit,
    r: float,
    cfg: ShadowConfig,
    seed_box: Box | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    y0 = np.asarray(p.point(0), dtype=float)
    lo, hi = y0 - r, y0 + r
    if p.space is Space.CUBE:
        lo, hi = np.maximum(lo, 0.0), np.minimum(hi, 1.0)
    if seed_box is not None:
        lo = np.maximum(lo, seed_box.lo_arr)
        hi = np.minimum(hi, seed_box.hi_arr)
        if np.any(lo > hi):
            raise NoSurvivingCellError(
                "seed box excludes the tracking tube", deepest_surviving_depth=0
            )
    fwd_times, bwd_times = _window_times(f, p)
    fwd = _make_stepper(f, Direction.FORWARD)
    bwd = _make_stepper(f, Direction.INVERSE) if bwd_times else None
    torus = p.space is Space.TORUS

    def survives(cl: np.ndarray, ch: np.ndarray) -> bool:
        for stepper, times in ((fwd, fwd_times), (bwd, bwd_times)):
            if not times:
                continue
            cur_lo, cur_hi = cl, ch
            for k in times:
                img_lo, img_hi = stepper(cur_lo, cur_hi)
                tgt = np.asarray(p.point(k), dtype=float)
                if torus:
                    shift = np.round(0.5 * (img_lo + img_hi) - tgt)
                    img_lo = img_lo - shift
                    img_hi = img_hi - shift
                cur_lo = np.maximum(img_lo - 1e-14, tgt - r)
                cur_hi = np.minimum(img_hi + 1e-14, tgt + r)
                if np.any(cur_lo > cur_hi):
                    return False
        return True

    if not survives(lo, hi):
        raise NoSurvivingCellError(
            "tracking tube is empty at the requested radius",
            deepest_surviving_depth=0,
        )
    splits = 0
    floor = max(cfg.cell_floor, 4e-14)
    for _ in range(cfg.depth):
        widths = hi - lo
        axis = int(np.argmax(widths))
        if widths[axis] <= floor:
            break
        mid = 0.5 * (lo[axis] + hi[axis])
        left_hi = hi.copy()
        left_hi[axis] = mid
        if survives(lo, left_hi):
            hi = left_hi
        else:
            right_lo = lo.copy()
            right_lo[axis] = mid
            if survives(right_lo, hi):
                lo = right_lo
            else:
                # Interval wrapping can make a parent cell survive while
                # both children fail; stop refining at the last honest
                # level rather than overclaim emptiness.
                break
        splits += 1
    return lo, hi, splits


# --- exact boundary-value solve ---------------------------------------------

def _integer_shifts(f: MapSpec, p: PseudoOrbit) -> list[np.ndarray]:
    """Lattice shift of each lifted step: s_k = round(M y_k + c - y_{k+1}).

    The true shadow satisfies M x_k + c - x_{k+1} = s_k exactly with the
    same s_k, because both orbits stay within a few delta of each other,
    far below the rounding threshold of 1/2.  Cyclic orbits get the wrap
    step appended.
    """
    steps = len(p.points) - 1 + (1 if p.periodic is not None else 0)
    if p.space is not Space.TORUS:
        return [np.zeros(p.n) for _ in range(steps)]
    mat = f.matrix_arr if f.matrix is not None else np.eye(f.n)
    off = f.offset_arr
    pts = [np.asarray(q, dtype=float) for q in p.points]
    nxt = pts[1:] + ([pts[0]] if p.periodic is not None else [])
    return [np.round(mat @ a + off - b) for a, b in zip(pts, nxt)]


def _exact_linear(f: MapSpec):
    step = exact_step(f, Direction.FORWARD)
    return step.matrix, step.offset


def _mat_vec(m, v):
    return tuple(sum(a * b for a, b in zip(row, v)) for row in m)


def _mat_mat(a, b):
    n = len(a)
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n))
        for i in range(n)
    )


def _identity_frac(n: int):
    one, zero = Fraction(1), Fraction(0)
    return tuple(
        tuple(one if i == j else zero for j in range(n)) for i in range(n)
    )


def _shifted_powers(f: MapSpec, p: PseudoOrbit, shifts) -> dict:
    """Exact affine maps x -> lift of f^k(x) aligned with the tubes.

    Composes X_{k+1} = M X_k + c - s_k forward from time 0 and the
    inverse relation backward, with the integer shifts keeping every
    image on the lift branch nearest its pseudo-orbit point.  Returns
    {k: (matrix, offset)} over the whole window.
    """
    n = p.n
    mat, off = _exact_linear(f)
    zero = tuple(Fraction(0) for _ in range(n))
    out = {0: (_identity_frac(n), zero)}
    m_cur, c_cur = out[0]
    for j in range(0, p.hi):
        s = frac_vec(shifts[j - p.lo])
        m_cur = _mat_mat(mat, m_cur)
        c_cur = tuple(
            a + b - sv for a, b, sv in zip(_mat_vec(mat, c_cur), off, s)
        )
        out[j + 1] = (m_cur, c_cur)
    if p.lo < 0:
        inv = fraction_inverse(mat)
        m_cur, c_cur = out[0]
        for j in range(0, p.lo, -1):
            s = frac_vec(shifts[j - 1 - p.lo])
            # X_{j-1} = M^-1 (X_j - c + s_{j-1})
            m_cur = _mat_mat(inv, m_cur)
            c_cur = tuple(
                _mat_vec(inv, tuple(a - b + sv for a, b, sv in zip(c_cur, off, s)))
            )
            out[j - 1] = (m_cur, c_cur)
    return out


def _cross_row(v):
    # cross(d, v) == 0 picks out d parallel to v; as a row functional.
    return (v[1], -v[0])


def _solve2(rows, rhs):
    det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    if det == 0:
        raise NotHyperbolicError("boundary-value system is singular")
    x0 = (rhs[0] * rows[1][1] - rows[0][1] * rhs[1]) / det
    x1 = (rows[0][0] * rhs[1] - rhs[0] * rows[1][0]) / det
    return (x0, x1)


def _bvp_point(f: MapSpec, p: PseudoOrbit, shifts) -> tuple[Fraction, ...]:
    """Exact time-0 shadow point for 2D exactly-affine hyperbolic maps.

    Kills the expanding component of the deviation at the window's far
    end and the contracting component at its start: the finite-window
    boundary conditions under which the deviation recursion
    d_{k+1} = M d_k + e_k stays geometrically bounded both ways.  Two
    linear conditions on two unknown coordinates; one exact solve.
    """
    eig = eigen_directions(f)
    if eig is None:
        raise NotHyperbolicError(f"{f.descriptor} has no rational eigen frame")
    powers = _shifted_powers(f, p, shifts)
    m_hi, c_hi = powers[p.hi]
    m_lo, c_lo = powers[p.lo]
    y_hi = frac_vec(p.point(p.hi))
    y_lo = frac_vec(p.point(p.lo))
    w_u = _cross_row(eig.row_s)   # annihilates the contracting direction
    w_s = _cross_row(eig.row_u)
    m_hi_t = tuple(zip(*m_hi))
    m_lo_t = tuple(zip(*m_lo))
    row1 = _mat_vec(m_hi_t, w_u)  # w_u^T M_hi
    row2 = _mat_vec(m_lo_t, w_s)
    rhs1 = sum(a * (b - c) for a, b, c in zip(w_u, y_hi, c_hi))
    rhs2 = sum(a * (b - c) for a, b, c in zip(w_s, y_lo, c_lo))
    return _solve2((row1, row2), (rhs1, rhs2))


def _exact_point_error(p: PseudoOrbit, y, k: int) -> float:
    target = p.point(k)
    d = tuple(a - frac(b) for a, b in zip(y, target))
    if p.space is Space.TORUS:
        d = nearest_lift(d)
    return math.hypot(*[float(v) for v in d])


def _exact_window_errors(f: MapSpec, p: PseudoOrbit, x0) -> list[float]:
    """Error profile of the exact orbit of a time-0 point over the window."""
    step = exact_step(f, Direction.FORWARD)
    out = {}
    y = tuple(x0)
    for k in range(0, p.hi + 1):
        out[k] = _exact_point_error(p, y, k)
        if k < p.hi:
            y = step.apply(y)
    if p.lo < 0:
        back = exact_step(f, Direction.INVERSE)
        y = tuple(x0)
        for k in range(-1, p.lo - 1, -1):
            y = back.apply(y)
            out[k] = _exact_point_error(p, y, k)
    return [out[k] for k in range(p.lo, p.hi + 1)]


def _float_orbit_point(f: MapSpec, x0, k: int) -> np.ndarray:
    y = np.asarray(x0, dtype=float)
    d = Direction.FORWARD if k >= 0 else Direction.INVERSE
    for _ in range(abs(k)):
        y = eval_point(f, d, y)
    return y


def _float_window_errors(f: MapSpec, p: PseudoOrbit, x0) -> list[float]:
    out = {}
    y = np.asarray(x0, dtype=float)
    for k in range(0, p.hi + 1):
        out[k] = _dist(p.space, y, p.point(k))
        if k < p.hi:
            y = eval_point(f, Direction.FORWARD, y)
    if p.lo < 0:
        y = np.asarray(x0, dtype=float)
        for k in range(-1, p.lo - 1, -1):
            y = eval_point(f, Direction.INVERSE, y)
            out[k] = _dist(p.space, y, p.point(k))
    return [out[k] for k in range(p.lo, p.hi + 1)]


# --- results ----------------------------------------------------------------

@dataclass(frozen=True)
class ShadowResult:
    """A certified true-orbit point tracing the pseudo-orbit.

    ``point`` holds exact rationals for the exactly-affine kinds, floats
    otherwise.  eps_achieved is the recomputed max per-step distance.
    """

    point: tuple
    window: tuple[int, int]
    eps_achieved: float
    surviving_box: Box
    periodic: int | None = None
    minimal_period: int | None = None

    @property
    def point_floats(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.point)

    @property
    def exact(self) -> bool:
        return isinstance(self.point[0], Fraction)

    def to_json(self) -> dict:
        return {
            "point": list(self.point_floats),
            "point_exact": (
                [f"{v.numerator}/{v.denominator}" for v in self.point]
                if self.exact
                else None
            ),
            "window": list(self.window),
            "eps_achieved": self.eps_achieved,
            "surviving_box": {
                "lo": list(self.surviving_box.lo),
                "hi": list(self.surviving_box.hi),
                "space": self.surviving_box.space.value,
            },
            "periodic": self.periodic,
            "minimal_period": self.minimal_period,
        }


def shadow_result_from_json(data: dict) -> ShadowResult:
    if data.get("point_exact"):
        point = tuple(Fraction(v) for v in data["point_exact"])
    else:
        point = tuple(float(v) for v in data["point"])
    sb = data["surviving_box"]
    return ShadowResult(
        point=point,
        window=(int(data["window"][0]), int(data["window"][1])),
        eps_achieved=float(data["eps_achieved"]),
        surviving_box=Box(
            tuple(float(v) for v in sb["lo"]),
            tuple(float(v) for v in sb["hi"]),
            Space(sb["space"]),
        ),
        periodic=data.get("periodic"),
        minimal_period=data.get("minimal_period"),
    )


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    max_err: float
    argmax_k: int
    errors: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "max_err": self.max_err,
            "argmax_k": self.argmax_k,
            "errors": list(self.errors),
        }


def verify_shadow(f: MapSpec, x, p: PseudoOrbit, eps: float) -> VerifyReport:
    """Ground-truth check: iterate x across the window, measure every error.

    Independent of all certification machinery.  Exact rational points on
    exactly-affine maps iterate exactly; everything else in float (whose
    own roundoff growth then honestly shows up in the profile).
    """
    exact_in = supports_exact(f) and all(isinstance(v, Fraction) for v in x)
    if exact_in:
        errors = _exact_window_errors(f, p, tuple(x))
    else:
        errors = _float_window_errors(f, p, tuple(float(v) for v in x))
    ks = list(range(p.lo, p.hi + 1))
    max_err = max(errors)
    argmax = ks[errors.index(max_err)]
    return VerifyReport(
        ok=max_err < eps,
        max_err=max_err,
        argmax_k=argmax,
        errors=tuple(errors),
    )


# --- the shadow operations --------------------------------------------------

def _box_holds(box: Box, x) -> bool:
    """Whether the exact point (possibly a lift) lies in the float box."""
    ctr = 0.5 * (box.lo_arr + box.hi_arr)
    for v, lo, hi, c in zip(x, box.lo_arr, box.hi_arr, ctr):
        vf = float(v)
        if box.space is Space.TORUS:
            vf -= round(vf - c)
        if not (lo - 1e-15 <= vf <= hi + 1e-15):
            return False
    return True


def _check_cert(f: MapSpec, p: PseudoOrbit, cert: ChainedCertificate) -> None:
    if cert.subdivision.space is not p.space:
        raise ValueError("certificate and pseudo-orbit live on different spaces")
    if cert.map_id != f.descriptor:
        raise ValueError(
            f"certificate is for {cert.map_id!r}, not {f.descriptor!r}"
        )


def shadow(
    f: MapSpec,
    p: PseudoOrbit,
    cert: ChainedCertificate,
    eps: float,
    g: TransitionGraph | None = None,
    itin: Itinerary | None = None,
    cfg: ShadowConfig | None = None,
    seed_box: Box | None = None,
) -> ShadowResult:
    """Find a true orbit point whose distance to p stays below eps windowwide.

    The chained certificate vouches that the map is coverable at cube
    scale; the per-step chain anchored on the pseudo-orbit proves an
    orbit threads the delta-scale tubes; bisection against those tubes
    localizes it and yields the surviving cell; for exactly-affine maps
    the point is then pinned by an exact boundary-value solve and its
    error profile is measured in rational arithmetic.
    """
    cfg = cfg or ShadowConfig()
    _check_cert(f, p, cert)
    s = cert.subdivision
    if g is None:
        g = build_graph(f, s)
    if itin is None:
        itin = itinerary(p, s, g)
    step_chain(f, p, cfg)
    r = cfg.radius_factor * max(p.delta, cfg.delta_floor)
    cell_lo, cell_hi, splits = _bisect_cell(f, p, r, cfg, seed_box)
    surviving = Box(tuple(cell_lo), tuple(cell_hi), p.space)

    if supports_exact(f) and p.n == 2 and eigen_directions(f) is not None:
        shifts = _integer_shifts(f, p)
        x = _bvp_point(f, p, shifts)
        if seed_box is not None and not _box_holds(seed_box, x):
            # The free boundary-value point can sit a hair outside a seed
            # box inherited from a longer window; the cell center keeps
            # the nesting contract, and its (slightly larger) error
            # profile is measured honestly below.
            x = tuple(frac(0.5 * (a + b)) for a, b in zip(cell_lo, cell_hi))
        if p.space is Space.TORUS:
            x = torus_reduce(x)
        errors = _exact_window_errors(f, p, x)
        point: tuple = tuple(x)
    else:
        center = 0.5 * (cell_lo + cell_hi)
        point = tuple(float(v) for v in _wrap(p.space, center.copy()))
        errors = _float_window_errors(f, p, point)
    eps_achieved = max(errors)
    if eps_achieved >= eps:
        raise NoSurvivingCellError(
            f"best orbit achieves eps {eps_achieved}, not below requested {eps}",
            deepest_surviving_depth=splits,
        )
    return ShadowResult(
        point=point,
        window=p.window,
        eps_achieved=eps_achieved,
        surviving_box=surviving,
    )


def periodic_shadow(
    f: MapSpec,
    p: PseudoOrbit,
    cert: ChainedCertificate,
    eps: float,
    g: TransitionGraph | None = None,
    itin: Itinerary | None = None,
    cfg: ShadowConfig | None = None,
) -> ShadowResult:
    """Shadow a periodic pseudo-orbit by a genuinely periodic orbit.

    The cyclic covering chain composes to a self-covering of its first
    rectangle under f^P, which forces a fixed point of f^P inside the
    tube.  For exactly-affine maps that point solves a linear system over
    the rationals, making dist(f^P(x*), x*) exactly zero; other kinds
    refine by damped Newton down to cfg.fp_tol.
    """
    cfg = cfg or ShadowConfig()
    if p.periodic is None:
        raise ValueError("periodic_shadow needs a periodic pseudo-orbit")
    _check_cert(f, p, cert)
    s = cert.subdivision
    if g is None:
        g = build_graph(f, s)
    if itin is None:
        itin = itinerary(p, s, g)
    step_chain(f, p, cfg)
    P = len(p.points)
    r = cfg.radius_factor * max(p.delta, cfg.delta_floor)
    cell_lo, cell_hi, splits = _bisect_cell(f, p, r, cfg)
    surviving = Box(tuple(cell_lo), tuple(cell_hi), p.space)

    if supports_exact(f):
        shifts = _integer_shifts(f, p)
        mat, off = _exact_linear(f)
        m_cur = _identity_frac(p.n)
        c_cur = tuple(Fraction(0) for _ in range(p.n))
        for j in range(P):
            sft = frac_vec(shifts[j])
            m_cur = _mat_mat(mat, m_cur)
            c_cur = tuple(
                a + b - sv for a, b, sv in zip(_mat_vec(mat, c_cur), off, sft)
            )
        eye_minus = tuple(
            tuple(
                (Fraction(1) if i == j else Fraction(0)) - m_cur[i][j]
                for j in range(p.n)
            )
            for i in range(p.n)
        )
        try:
            x = _mat_vec(fraction_inverse(eye_minus), c_cur)
        except NotInvertibleError:
            raise FixedPointTolUnreachedError(
                f"f^{P} has eigenvalue one; no isolated fixed point to converge to"
            ) from None
        if p.space is Space.TORUS:
            x = torus_reduce(x)
        errors = [_exact_point_error(p, y, k) for k, y in _exact_cycle(f, x, P)]
        mp = minimal_period(f, tuple(x), P)
        point: tuple = tuple(x)
    else:
        x = 0.5 * (cell_lo + cell_hi)
        for _ in range(80):
            fx = _float_orbit_point(f, x, P)
            residual = fx - x
            if p.space is Space.TORUS:
                residual = (residual + 0.5) % 1.0 - 0.5
            if float(np.linalg.norm(residual)) <= cfg.fp_tol:
                break
            jac = np.eye(f.n)
            y = x.copy()
            for _ in range(P):
                jac = jacobian(f, tuple(y)) @ jac
                y = eval_point(f, Direction.FORWARD, y)
            try:
                dx = np.linalg.solve(jac - np.eye(f.n), -residual)
            except np.linalg.LinAlgError:
                raise FixedPointTolUnreachedError(
                    "degenerate linearization of the period map"
                ) from None
            x = _wrap(p.space, x + dx)
        else:
            raise FixedPointTolUnreachedError(
                f"Newton left residual above fp_tol {cfg.fp_tol}"
            )
        point = tuple(float(v) for v in x)
        errors = [
            _dist(p.space, _float_orbit_point(f, point, k), p.point(k))
            for k in range(P)
        ]
        mp = None
    eps_achieved = max(errors)
    if eps_achieved >= eps:
        raise NoSurvivingCellError(
            f"periodic point achieves eps {eps_achieved}, not below {eps}",
            deepest_surviving_depth=splits,
        )
    return ShadowResult(
        point=point,
        window=(0, P - 1),
        eps_achieved=eps_achieved,
        surviving_box=surviving,
        periodic=p.periodic,
        minimal_period=mp,
    )


def _exact_cycle(f: MapSpec, x, P: int):
    step = exact_step(f, Direction.FORWARD)
    y = tuple(x)
    for k in range(P):
        yield k, y
        y = step.apply(y)


# --- specification splicing -------------------------------------------------

def specification_splice(
    f: MapSpec,
    g: TransitionGraph,
    segments,
    gap: int,
) -> PseudoOrbit:
    """Join true-orbit segments into one periodic pseudo-orbit.

    Between consecutive segments (cyclically) a certified cube path of at
    most ``gap`` edges bridges from the cube receiving the departing
    image to the next segment's starting cube; bridge waypoints are cube
    centers, maximizing clearance.  The result's delta is the measured
    worst defect (deliberately cube-scale, hence the explicit itinerary),
    and it is ready for periodic_shadow.
    """
    if gap < 1:
        raise ValueError("gap must be >= 1")
    segs = [[tuple(float(v) for v in q) for q in seg] for seg in segments]
    if not segs:
        raise ValueError("need at least one segment")
    s = g.subdivision
    for seg in segs:
        if not seg:
            raise ValueError("segments must be nonempty")
        for a, b in zip(seg, seg[1:]):
            d = _dist(f.space, eval_point(f, Direction.FORWARD, a), b)
            if d > 1e-9:
                raise ValueError(
                    f"segment step defect {d}; segments must be true orbit pieces"
                )
    points: list[tuple[float, ...]] = []
    indices: list[int] = []
    for j, seg in enumerate(segs):
        points.extend(seg)
        indices.extend(_cube_index(s, q) for q in seg)
        nxt = segs[(j + 1) % len(segs)]
        depart = eval_point(f, Direction.FORWARD, seg[-1])
        start_cube = _cube_index(s, depart)
        goal_cube = _cube_index(s, nxt[0])
        path = find_path(g, start_cube, goal_cube, max_len=gap)
        # The goal cube is represented by the next segment's own first
        # point, so only the earlier path cubes become center waypoints.
        for cube in path[:-1]:
            points.append(s.box(cube).center)
            indices.append(cube)
    defects = [
        _dist(f.space, eval_point(f, Direction.FORWARD, a), b)
        for a, b in zip(points, points[1:] + points[:1])
    ]
    delta = max(defects) * (1.0 + 1e-9) + 1e-15
    return pseudo_orbit(
        f,
        points,
        delta,
        lo=0,
        periodic=len(points),
        known_itinerary=indices,
    )


# --- serialization helpers --------------------------------------------------

def orbit_csv(f: MapSpec, p: PseudoOrbit, result: ShadowResult) -> str:
    """CSV profile: time, pseudo-orbit point, shadow orbit point, error."""
    report = verify_shadow(f, result.point, p, math.inf)
    buf = io.StringIO()
    writer = csv.writer(buf)
    n = p.n
    writer.writerow(
        ["k"]
        + [f"y_{d + 1}" for d in range(n)]
        + [f"x_{d + 1}" for d in range(n)]
        + ["err"]
    )
    ks = list(range(p.lo, p.hi + 1))
    if result.exact and supports_exact(f):
        orbit = _exact_orbit_table(f, result.point, p)
    else:
        orbit = [
            tuple(float(v) for v in _float_orbit_point(f, result.point_floats, k))
            for k in ks
        ]
    for k, err, x in zip(ks, report.errors, orbit):
        writer.writerow(
            [k]
            + [repr(float(v)) for v in p.point(k)]
            + [repr(float(v)) for v in x]
            + [repr(err)]
        )
    return buf.getvalue()


def _exact_orbit_table(f: MapSpec, x, p: PseudoOrbit):
    step = exact_step(f, Direction.FORWARD)
    rows = {}
    y = tuple(x)
    for k in range(0, p.hi + 1):
        rows[k] = tuple(float(v) for v in y)
        if k < p.hi:
            y = step.apply(y)
    if p.lo < 0:
        back = exact_step(f, Direction.INVERSE)
        y = tuple(x)
        for k in range(-1, p.lo - 1, -1):
            y = back.apply(y)
            rows[k] = tuple(float(v) for v in y)
    return [rows[k] for k in range(p.lo, p.hi + 1)]
