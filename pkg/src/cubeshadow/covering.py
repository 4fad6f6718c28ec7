"""Covering certificates: rigorous Markovian-intersection checks.

A certificate proves that the image of a horizontal strip of a source
rectangle stretches across a target rectangle along the target's exit
axis (both end faces land strictly beyond, on opposite sides) while the
whole strip image stays strictly inside the target on every other axis.
The check runs in the target's own chart through interval enclosures, so
a recorded certificate can always be re-verified from its stored data.

Charts here are deliberately modest: a rectangle is an axis box optionally
rotated about its own center by an orthonormal frame.  That is enough to
align with the expanding/contracting directions of a hyperbolic linear
map; anything the restricted chart cannot decide is reported Inconclusive
rather than guessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._intervals import mat_interval, widen
from .dynamics import (
    Direction,
    MapSpec,
    _eval_raw,
    eval_box,
    jacobian,
    linear_part,
    residual_range,
)
from .errors import MismatchedChainError, NotEndomorphismError, UncertainEdgesError
from .geometry import Box, Space, Subdivision
from .transition import TransitionGraph

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Rectangle:
    """An oriented box, optionally rotated about its center.

    ``box`` gives the side ranges; with a ``frame`` (orthonormal rows) the
    ambient set is the box rotated about its own center, the frame rows
    acting as the rectangle's axes.  ``exit_axis`` is the coordinate that
    plays the expanding role; its two end faces are the rectangle's
    horizontal faces, labelled by ``orientation``.
    """

    box: Box
    exit_axis: int
    orientation: int = 1
    frame: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        n = self.box.n
        if not (0 <= self.exit_axis < n):
            raise ValueError(f"exit_axis {self.exit_axis} out of range for n={n}")
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be +1 or -1")
        if any(b <= a for a, b in zip(self.box.lo, self.box.hi)):
            raise ValueError("rectangle must have positive volume on every axis")
        if self.frame is not None:
            m = np.array(self.frame, dtype=float)
            if m.shape != (n, n):
                raise ValueError(f"frame must be {n}x{n}")
            if not np.allclose(m @ m.T, np.eye(n), atol=_ORTHO_TOL):
                raise ValueError("frame rows must be orthonormal")

    @classmethod
    def from_box(cls, box: Box, exit_axis: int, orientation: int = 1) -> "Rectangle":
        return cls(box=box, exit_axis=exit_axis, orientation=orientation)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def frame_arr(self) -> np.ndarray:
        if self.frame is None:
            return np.eye(self.n)
        return np.array(self.frame, dtype=float)

    @property
    def center(self) -> tuple[float, ...]:
        return self.box.center

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.box.hi_arr - self.box.lo_arr)

    def ambient_bounding_halfwidths(self) -> np.ndarray:
        """Per-ambient-axis half extent of the (possibly rotated) set."""
        return np.abs(self.frame_arr.T) @ self.half_widths

    def to_ambient(self, coords: np.ndarray) -> np.ndarray:
        """Chart coordinates (absolute, box-aligned) to ambient points."""
        c = np.array(self.center)
        return c + (np.atleast_2d(coords) - c) @ self.frame_arr

    def contains_point(self, p, tol: float = 0.0) -> bool:
        c = np.array(self.center)
        u = self.frame_arr @ (np.asarray(p, dtype=float) - c)
        return bool(np.all(np.abs(u) <= self.half_widths + tol))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """k ambient points uniform in the rectangle."""
        u = rng.uniform(-1.0, 1.0, size=(k, self.n)) * self.half_widths
        c = np.array(self.center)
        return c + u @ self.frame_arr

    def face_points(
        self, rng: np.random.Generator, k: int, side: int, h_range=None
    ) -> np.ndarray:
        """k ambient points on one exit-axis end face of the strip.

        ``side`` -1/+1 picks the lower/upper end of ``h_range`` (defaults
        to the full exit range); the remaining coordinates are uniform.
        """
        lo = self.box.lo_arr.copy()
        hi = self.box.hi_arr.copy()
        e = self.exit_axis
        a, b = h_range if h_range is not None else (lo[e], hi[e])
        val = a if side < 0 else b
        coords = rng.uniform(lo, hi, size=(k, self.n))
        coords[:, e] = val
        return self.to_ambient(coords)

    def to_json(self) -> dict:
        return {
            "box": {"lo": list(self.box.lo), "hi": list(self.box.hi),
                    "space": self.box.space.value},
            "exit_axis": self.exit_axis,
            "orientation": self.orientation,
            "frame": None if self.frame is None else [list(r) for r in self.frame],
        }


def rectangle_from_json(data: dict) -> Rectangle:
    b = data["box"]
    box = Box(tuple(b["lo"]), tuple(b["hi"]), Space(b["space"]))
    frame = data.get("frame")
    return Rectangle(
        box=box,
        exit_axis=int(data["exit_axis"]),
        orientation=int(data["orientation"]),
        frame=None if frame is None else tuple(tuple(r) for r in frame),
    )


@dataclass(frozen=True)
class CoveringConfig:
    depth: int = 6                    # dyadic strip search depth along the exit axis
    min_margin: float = 1e-9          # quantified strictness for every inequality
    ratios: tuple[float, ...] = (0.5, 0.25, 0.125)
    eigen_hint: bool = True           # align chained rectangles to the expansion
    policy: str = "anchored"          # "anchored" per-edge | "centered" per-cube
    allow_uncertain: bool = False


@dataclass(frozen=True)
class Inconclusive:
    """Not a certificate and not a disproof: the restricted chart failed."""

    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class CoveringCertificate:
    source: Rectangle
    target: Rectangle
    h_range: tuple[float, float]
    exit_margin: float
    confinement_margin: float
    orientation: int  # +1 when the labelled faces cross label-preserving

    def __post_init__(self) -> None:
        if not (self.exit_margin > 0.0 and self.confinement_margin > 0.0):
            raise ValueError("certificate margins must be strictly positive")

    def to_json(self) -> dict:
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "h_range": list(self.h_range),
            "exit_margin": self.exit_margin,
            "confinement_margin": self.confinement_margin,
            "orientation": self.orientation,
        }


def certificate_from_json(data: dict) -> CoveringCertificate:
    return CoveringCertificate(
        source=rectangle_from_json(data["source"]),
        target=rectangle_from_json(data["target"]),
        h_range=(float(data["h_range"][0]), float(data["h_range"][1])),
        exit_margin=float(data["exit_margin"]),
        confinement_margin=float(data["confinement_margin"]),
        orientation=int(data["orientation"]),
    )


def certificate_margin(c: CoveringCertificate) -> float:
    """Robustness radius: any g with sup_x |g(x) - f(x)|_2 below this value
    admits the same certified covering with the same strip, because every
    enclosure face shifts by at most that distance in the target chart."""
    return min(c.exit_margin, c.confinement_margin)


def _strip_ambient_box(src: Rectangle, h0: float, h1: float) -> tuple[np.ndarray, np.ndarray]:
    """Ambient bounding box of the strip (for residual enclosures)."""
    c = np.array(src.center)
    half = src.half_widths.copy()
    mid = c.copy()
    e = src.exit_axis
    mid[e] = 0.5 * (h0 + h1)
    half[e] = 0.5 * (h1 - h0)
    # Chart center of the strip, then rotate out to ambient extents.
    amb_mid = c + (mid - c) @ src.frame_arr
    amb_half = np.abs(src.frame_arr.T) @ half
    return amb_mid - amb_half, amb_mid + amb_half


def _local_endomorphism_check(f: MapSpec, src: Rectangle) -> None:
    if f.space is not Space.CUBE:
        return
    lo, hi = _strip_ambient_box(src, src.box.lo[src.exit_axis], src.box.hi[src.exit_axis])
    lift = eval_box(f, Direction.FORWARD, Box(
        tuple(np.clip(lo, 0.0, 1.0)), tuple(np.clip(hi, 0.0, 1.0)), Space.CUBE))
    slack = 1e-9
    if any(v < -slack for v in lift.lo) or any(v > 1.0 + slack for v in lift.hi):
        raise NotEndomorphismError(
            f"{f.descriptor} maps the source rectangle outside the unit cube"
        )


class _ChartImages:
    """Interval images of strip pieces in the target's centered chart.

    v = M u + o + Fd r, with u the source chart offsets, M = Fd A Fs^T,
    o covering the affine offset and the integer lift shift, r the
    nonlinearity residual over the strip's ambient bounding box.
    """

    def __init__(self, f: MapSpec, src: Rectangle, dst: Rectangle):
        self.f = f
        self.src = src
        self.dst = dst
        self.fs = src.frame_arr
        self.fd = dst.frame_arr
        a, b = linear_part(f, Direction.FORWARD)
        self.mat = self.fd @ a @ self.fs.T
        c_src = np.array(src.center)
        c_dst = np.array(dst.center)
        raw_center = _eval_raw(f, Direction.FORWARD, c_src)
        if f.space is Space.TORUS:
            self.shift = np.round(raw_center - c_dst)
        else:
            self.shift = np.zeros(f.n)
        self.offset = self.fd @ (a @ c_src + b - self.shift - c_dst)

    def image_interval(self, u_lo: np.ndarray, u_hi: np.ndarray,
                       amb_lo: np.ndarray, amb_hi: np.ndarray):
        lo, hi = mat_interval(self.mat, u_lo, u_hi)
        r_lo, r_hi = residual_range(self.f, Direction.FORWARD, amb_lo, amb_hi)
        if np.any(r_lo != 0.0) or np.any(r_hi != 0.0):
            d_lo, d_hi = mat_interval(self.fd, r_lo, r_hi)
            lo = lo + d_lo
            hi = hi + d_hi
        return widen(lo + self.offset, hi + self.offset)


def _check_strip(
    chart: _ChartImages, h0: float, h1: float, min_margin: float
):
    """Margins of one strip, or None when the criterion fails on it."""
    src, dst = chart.src, chart.dst
    e, e2 = src.exit_axis, dst.exit_axis
    c_src = np.array(src.center)
    half = src.half_widths
    dst_half = dst.half_widths

    u_lo = -half.copy()
    u_hi = half.copy()
    u_lo[e] = h0 - c_src[e]
    u_hi[e] = h1 - c_src[e]
    amb_lo, amb_hi = _strip_ambient_box(src, h0, h1)

    def face(val: float):
        lo = u_lo.copy()
        hi = u_hi.copy()
        lo[e] = hi[e] = val
        return chart.image_interval(lo, hi, amb_lo, amb_hi)

    lo_face = face(u_lo[e])
    hi_face = face(u_hi[e])
    minus, plus = (lo_face, hi_face) if src.orientation > 0 else (hi_face, lo_face)

    tgt = dst_half[e2]
    below_minus = -tgt - minus[1][e2]   # minus face strictly below the target
    above_minus = minus[0][e2] - tgt
    below_plus = -tgt - plus[1][e2]
    above_plus = plus[0][e2] - tgt
    straight = min(below_minus, above_plus)
    crossed = min(above_minus, below_plus)
    if straight >= crossed:
        exit_margin, geo = straight, 1
    else:
        exit_margin, geo = crossed, -1
    if exit_margin < min_margin:
        return None, float(exit_margin)
    orientation = geo * dst.orientation

    strip_lo, strip_hi = chart.image_interval(u_lo, u_hi, amb_lo, amb_hi)
    conf = math.inf
    for a2 in range(dst.n):
        if a2 == e2:
            continue
        conf = min(conf, strip_lo[a2] + dst_half[a2], dst_half[a2] - strip_hi[a2])
    if math.isinf(conf):
        conf = exit_margin
    if conf < min_margin:
        return None, float(min(exit_margin, conf))
    return (float(exit_margin), float(conf), orientation), float(min(exit_margin, conf))


def check_covering(
    f: MapSpec,
    src: Rectangle,
    dst: Rectangle,
    cfg: CoveringConfig | None = None,
    strip: tuple[float, float] | None = None,
) -> CoveringCertificate | Inconclusive:
    """Search dyadic strips of src for a certified covering of dst.

    Strips are visited by increasing depth, left to right; the first one
    satisfying both the exit and the confinement condition wins, so the
    result is deterministic. Failure is Inconclusive, never a disproof:
    a chart outside the restricted family might still certify the pair.

    ``strip`` pins the check to one given h-range instead of searching,
    e.g. to re-certify a nearby map on the strip a certificate recorded.
    """
    cfg = cfg or CoveringConfig()
    if not (f.n == src.n == dst.n):
        raise ValueError("map and rectangles must share a dimension")
    if src.box.space is not dst.box.space:
        raise ValueError("rectangles must live in the same space")
    if f.space is Space.TORUS:
        for r in (src, dst):
            if np.any(2.0 * r.ambient_bounding_halfwidths() >= 0.5):
                raise ValueError("rectangle too large for a single torus chart")
    _local_endomorphism_check(f, src)

    chart = _ChartImages(f, src, dst)
    e = src.exit_axis
    lo_e, hi_e = src.box.lo[e], src.box.hi[e]

    if strip is not None:
        h0, h1 = float(strip[0]), float(strip[1])
        if not (lo_e <= h0 < h1 <= hi_e):
            raise ValueError("strip must be a nondegenerate sub-range of the exit side")
        result, score = _check_strip(chart, h0, h1, cfg.min_margin)
        if result is None:
            return Inconclusive(
                f"prescribed strip failed; margin shortfall {score:.3e}"
            )
        exit_margin, conf, orientation = result
        return CoveringCertificate(
            source=src, target=dst, h_range=(h0, h1),
            exit_margin=exit_margin, confinement_margin=conf,
            orientation=orientation,
        )

    best = -math.inf
    best_at = None
    for d in range(cfg.depth + 1):
        pieces = 1 << d
        step = (hi_e - lo_e) / pieces
        for k in range(pieces):
            h0 = lo_e + k * step
            h1 = hi_e if k == pieces - 1 else lo_e + (k + 1) * step
            result, score = _check_strip(chart, h0, h1, cfg.min_margin)
            if result is not None:
                exit_margin, conf, orientation = result
                return CoveringCertificate(
                    source=src,
                    target=dst,
                    h_range=(h0, h1),
                    exit_margin=exit_margin,
                    confinement_margin=conf,
                    orientation=orientation,
                )
            if score > best:
                best = score
                best_at = (d, k)
    return Inconclusive(
        f"no strip certified to depth {cfg.depth}; best margin shortfall "
        f"{best:.3e} at depth {best_at[0]} piece {best_at[1]}"
    )


def verify_certificate(
    f: MapSpec, cert: CoveringCertificate, cfg: CoveringConfig | None = None
) -> bool:
    """Re-check a stored certificate from scratch on its recorded strip."""
    cfg = cfg or CoveringConfig()
    chart = _ChartImages(f, cert.source, cert.target)
    result, _score = _check_strip(
        chart, cert.h_range[0], cert.h_range[1], cfg.min_margin
    )
    if result is None:
        return False
    exit_margin, conf, orientation = result
    tol = 1e-12
    return (
        orientation == cert.orientation
        and exit_margin >= cert.exit_margin - tol
        and conf >= cert.confinement_margin - tol
    )


# --- chained certification --------------------------------------------------


@dataclass(frozen=True)
class ChainedCertificate:
    """Per-edge covering certificates over a transition graph.

    ``excluded_boundary`` lists CertifiedNonempty edges whose cube
    intersection has no interior at this resolution (witness clearance 0,
    e.g. cubes touching at a corner): no rectangles inside the two cubes
    can have intersecting images, so they are excluded and reported rather
    than certified.
    """

    map_id: str
    subdivision: Subdivision
    policy: str
    certificates: dict[tuple[int, int], CoveringCertificate]
    excluded_boundary: frozenset[tuple[int, int]]

    @property
    def certified_pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.certificates)

    def margin(self) -> float:
        return min(certificate_margin(c) for c in self.certificates.values())

    def to_json(self) -> dict:
        return {
            "map_id": self.map_id,
            "subdivision": self.subdivision.to_json(),
            "policy": self.policy,
            "certificates": {
                f"{i},{j}": c.to_json() for (i, j), c in sorted(self.certificates.items())
            },
            "excluded_boundary": sorted(list(p) for p in self.excluded_boundary),
            "margin": self.margin(),
        }


@dataclass(frozen=True)
class FailureReport:
    map_id: str
    policy: str
    total_edges: int
    certified: int
    failures: tuple[tuple[int, int, str], ...]
    excluded_boundary: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def to_json(self) -> dict:
        return {
            "map_id": self.map_id,
            "policy": self.policy,
            "total_edges": self.total_edges,
            "certified": self.certified,
            "failures": [list(f) for f in self.failures],
            "excluded_boundary": sorted(list(p) for p in self.excluded_boundary),
        }


def expansion_frame(f: MapSpec, at=None) -> tuple[np.ndarray, np.ndarray] | None:
    """Orthonormal frame rows sorted by decreasing |eigenvalue| of Df.

    None when the spectrum is complex: the restricted rectangle charts
    have nothing to align to. For non-symmetric derivatives the rows are
    the orthonormalized eigenbasis, expansion direction kept exact.
    """
    point = at if at is not None else (0.5,) * f.n
    d = jacobian(f, point)
    vals, vecs = np.linalg.eig(d)
    if np.abs(np.asarray(vals).imag).max() > 1e-12:
        return None
    vals = np.asarray(vals).real
    vecs = np.asarray(vecs).real
    order = np.argsort(-np.abs(vals))
    basis = vecs[:, order]
    q, r = np.linalg.qr(basis)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    q = q * signs
    return q.T, vals[order]


def _anchored_pair(
    f: MapSpec,
    s: Subdivision,
    witness,
    frame: np.ndarray | None,
) -> tuple[Rectangle, Rectangle]:
    """Source/target rectangles centered on an interior witness and its image."""
    fit = 1.0
    if frame is not None:
        fit = float(np.max(np.sum(np.abs(frame), axis=0)))
    rho = 0.999 * witness.clearance / fit
    x0 = np.array(witness.point)
    y0 = np.array(witness.image)
    tup = _frame_tuple(frame)
    space = s.space

    def rect(center: np.ndarray) -> Rectangle:
        # clearance >= fit * rho keeps the ranges inside the cube, hence [0,1].
        lo = tuple(float(v) for v in center - rho)
        hi = tuple(float(v) for v in center + rho)
        return Rectangle(Box(lo, hi, space), exit_axis=0, orientation=1, frame=tup)

    return rect(x0), rect(y0)


def _frame_tuple(frame: np.ndarray | None):
    if frame is None:
        return None
    return tuple(tuple(float(v) for v in row) for row in frame)


def _centered_family(
    s: Subdivision, ratio: float, exit_axis: int, orientation: int,
    frame: np.ndarray | None,
) -> list[Rectangle]:
    tup = _frame_tuple(frame)
    fit = 1.0 if frame is None else float(np.max(np.sum(np.abs(frame), axis=0)))
    rects = []
    for i in range(s.count):
        box = s.box(i)
        c = box.center
        h = 0.5 * ratio * s.cube_width / fit
        lo = tuple(x - h for x in c)
        hi = tuple(x + h for x in c)
        rects.append(Rectangle(Box(lo, hi, s.space), exit_axis, orientation, tup))
    return rects


def certify_chained(
    f: MapSpec,
    s: Subdivision,
    g: TransitionGraph,
    cfg: CoveringConfig | None = None,
) -> ChainedCertificate | FailureReport:
    """Attempt a covering certificate for every certifiable nonempty edge.

    Anchored policy (default): each interior-witnessed edge gets its own
    rectangle pair centered on the witness and its image, shaped by the
    expansion frame; boundary-only edges are excluded and listed.
    Centered policy: one rectangle per cube at the configured shrink
    ratios, every exit axis and orientation, first fully-certifying family
    wins; edge-anchoring is not used.
    """
    cfg = cfg or CoveringConfig()
    if g.uncertain and not cfg.allow_uncertain:
        raise UncertainEdgesError(
            f"{len(g.uncertain)} uncertain edges; refine the graph or allow_uncertain"
        )
    edges = sorted(g.witnesses)
    hint = expansion_frame(f) if cfg.eigen_hint else None
    frame = None
    if hint is not None:
        rows, vals = hint
        if np.abs(vals[0]) > 1.0 + 1e-9 and f.n >= 2:
            frame = rows

    if cfg.policy == "centered":
        return _certify_centered(f, s, g, cfg, edges, frame)
    if cfg.policy != "anchored":
        raise ValueError(f"unknown policy {cfg.policy!r}")

    certs: dict[tuple[int, int], CoveringCertificate] = {}
    failures: list[tuple[int, int, str]] = []
    excluded: set[tuple[int, int]] = set()
    for (i, j) in edges:
        w = g.witnesses[(i, j)]
        if not w.interior:
            excluded.add((i, j))
            continue
        src, dst = _anchored_pair(f, s, w, frame)
        result = check_covering(f, src, dst, cfg)
        if isinstance(result, CoveringCertificate):
            certs[(i, j)] = result
        else:
            failures.append((i, j, result.reason))

    if failures or not certs:
        if not failures:
            failures = [(-1, -1, "no interior-witnessed edges to certify")]
        return FailureReport(
            map_id=f.descriptor,
            policy="anchored",
            total_edges=len(edges),
            certified=len(certs),
            failures=tuple(failures),
            excluded_boundary=frozenset(excluded),
        )
    return ChainedCertificate(
        map_id=f.descriptor,
        subdivision=s,
        policy="anchored",
        certificates=certs,
        excluded_boundary=frozenset(excluded),
    )


def _certify_centered(
    f: MapSpec,
    s: Subdivision,
    g: TransitionGraph,
    cfg: CoveringConfig,
    edges: list[tuple[int, int]],
    frame: np.ndarray | None,
) -> ChainedCertificate | FailureReport:
    frames = [None] if frame is None else [frame, None]
    best_failures: tuple[tuple[int, int, str], ...] | None = None
    best_certified = -1
    for fr in frames:
        for ratio in cfg.ratios:
            for axis in range(s.n):
                for orient in (1, -1):
                    rects = _centered_family(s, ratio, axis, orient, fr)
                    certs: dict[tuple[int, int], CoveringCertificate] = {}
                    failures: list[tuple[int, int, str]] = []
                    for (i, j) in edges:
                        result = check_covering(f, rects[i], rects[j], cfg)
                        if isinstance(result, CoveringCertificate):
                            certs[(i, j)] = result
                        else:
                            failures.append((i, j, result.reason))
                    if not failures:
                        return ChainedCertificate(
                            map_id=f.descriptor,
                            subdivision=s,
                            policy="centered",
                            certificates=certs,
                            excluded_boundary=frozenset(),
                        )
                    if len(certs) > best_certified:
                        best_certified = len(certs)
                        best_failures = tuple(failures)
    return FailureReport(
        map_id=f.descriptor,
        policy="centered",
        total_edges=len(edges),
        certified=max(best_certified, 0),
        failures=best_failures or (),
    )


# --- composition ------------------------------------------------------------


@dataclass(frozen=True)
class ChainValidity:
    source: Rectangle
    target: Rectangle
    length: int


def compose_chain(certs) -> ChainValidity:
    """Validate that consecutive certificates link exactly.

    cert_k.target must equal cert_{k+1}.source bit for bit; a valid chain
    guarantees an orbit visiting every rectangle in order (each covering
    pulls a full-width strip of its target back into its source).
    """
    certs = list(certs)
    if not certs:
        raise ValueError("empty certificate chain")
    for k, (a, b) in enumerate(zip(certs, certs[1:])):
        if a.target != b.source:
            raise MismatchedChainError(
                f"chain link {k}: target of certificate {k} differs from "
                f"source of certificate {k + 1}"
            )
    return ChainValidity(source=certs[0].source, target=certs[-1].target,
                         length=len(certs))


__all__ = [
    "Rectangle",
    "CoveringConfig",
    "CoveringCertificate",
    "Inconclusive",
    "ChainedCertificate",
    "FailureReport",
    "ChainValidity",
    "check_covering",
    "certificate_margin",
    "certify_chained",
    "compose_chain",
    "verify_certificate",
    "expansion_frame",
    "rectangle_from_json",
    "certificate_from_json",
]
