"""Builtin map family: pointwise, inverse, and rigorous box-enclosure evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._intervals import mat_interval, sin_range, widen
from .errors import InvalidMapError, NotInvertibleError
from .geometry import Box, Lift, Space, parse_space

TWO_PI = 2.0 * math.pi


class MapKind(str, Enum):
    IDENTITY = "identity"
    TRANSLATION = "translation"
    TORAL = "toral"
    AFFINE = "affine"
    STANDARD = "standard"
    PERTURBED = "perturbed"


class Direction(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class MapSpec:
    """Immutable description of one builtin map.

    Parameter fields are stored as tuples so specs hash and compare by value;
    evaluators convert to arrays on use.
    """

    kind: MapKind
    n: int
    space: Space
    invertible: bool
    matrix: tuple[tuple[float, ...], ...] | None = None
    inverse_matrix: tuple[tuple[float, ...], ...] | None = None
    offset: tuple[float, ...] | None = None
    kappa: float = 0.0
    eta: float = 0.0
    freq: int = 1
    descriptor: str = ""

    @property
    def matrix_arr(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @property
    def inverse_matrix_arr(self) -> np.ndarray:
        return np.array(self.inverse_matrix, dtype=float)

    @property
    def offset_arr(self) -> np.ndarray:
        if self.offset is None:
            return np.zeros(self.n)
        return np.array(self.offset, dtype=float)

    def to_json(self) -> dict:
        return {
            "descriptor": self.descriptor,
            "kind": self.kind.value,
            "n": self.n,
            "space": self.space.value,
            "invertible": self.invertible,
        }


def _int_det(rows: list[list[int]]) -> int:
    if len(rows) == 1:
        return rows[0][0]
    total = 0
    for j, head in enumerate(rows[0]):
        if head == 0:
            continue
        minor = [row[:j] + row[j + 1 :] for row in rows[1:]]
        total += (-1) ** j * head * _int_det(minor)
    return total


def _as_int_matrix(matrix) -> list[list[int]]:
    rows = []
    for row in matrix:
        ints = []
        for v in row:
            if float(v) != int(v):
                raise InvalidMapError(f"matrix entry {v!r} is not an integer")
            ints.append(int(v))
        rows.append(ints)
    if any(len(r) != len(rows) for r in rows):
        raise InvalidMapError("matrix is not square")
    return rows


def _freeze(matrix) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in matrix)


def identity_map(n: int = 2, space: Space = Space.TORUS) -> MapSpec:
    return MapSpec(
        kind=MapKind.IDENTITY,
        n=n,
        space=space,
        invertible=True,
        descriptor=f"identity n={n}",
    )


def translation_map(vector, space: Space = Space.TORUS) -> MapSpec:
    vec = tuple(float(v) for v in vector)
    return MapSpec(
        kind=MapKind.TRANSLATION,
        n=len(vec),
        space=space,
        invertible=True,
        offset=vec,
        descriptor="translation " + _fmt_vector(vec),
    )


def toral_map(matrix, space: Space = Space.TORUS) -> MapSpec:
    rows = _as_int_matrix(matrix)
    n = len(rows)
    det = _int_det(rows)
    if det not in (1, -1):
        raise InvalidMapError(f"toral matrix must have determinant +-1, got {det}")
    # adj(A)/det is the exact integer inverse; recover it by rounding the
    # float inverse and verifying the product exactly.
    inv = np.rint(np.linalg.inv(np.array(rows, dtype=float))).astype(int)
    if not np.array_equal(np.array(rows) @ inv, np.eye(n, dtype=int)):
        raise InvalidMapError("failed to recover exact integer inverse")
    return MapSpec(
        kind=MapKind.TORAL,
        n=n,
        space=space,
        invertible=True,
        matrix=_freeze(rows),
        inverse_matrix=_freeze(inv),
        descriptor="toral " + _fmt_matrix(rows),
    )


def affine_map(matrix, offset=None, space: Space = Space.CUBE) -> MapSpec:
    mat = np.array(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidMapError("affine matrix must be square")
    n = mat.shape[0]
    off = tuple(float(v) for v in (offset if offset is not None else np.zeros(n)))
    if len(off) != n:
        raise InvalidMapError("affine offset dimension mismatch")
    det = np.linalg.det(mat)
    invertible = abs(det) > 1e-12
    inv = _freeze(np.linalg.inv(mat)) if invertible else None
    desc = "affine " + _fmt_matrix(mat) + " offset=" + _fmt_vector(off)
    return MapSpec(
        kind=MapKind.AFFINE,
        n=n,
        space=space,
        invertible=invertible,
        matrix=_freeze(mat),
        inverse_matrix=inv,
        offset=off,
        descriptor=desc,
    )


def standard_map(kappa: float, space: Space = Space.TORUS) -> MapSpec:
    return MapSpec(
        kind=MapKind.STANDARD,
        n=2,
        space=space,
        invertible=True,
        matrix=((1.0, 1.0), (0.0, 1.0)),
        inverse_matrix=((1.0, -1.0), (0.0, 1.0)),
        kappa=float(kappa),
        descriptor=f"standard K={float(kappa)!r}",
    )


def perturbed_map(
    matrix, eta: float, freq: int = 1, space: Space = Space.TORUS
) -> MapSpec:
    rows = _as_int_matrix(matrix)
    det = _int_det(rows)
    if det not in (1, -1):
        raise InvalidMapError(f"perturbed base matrix must have determinant +-1, got {det}")
    if eta < 0:
        raise InvalidMapError("perturbation amplitude must be >= 0")
    if int(freq) != freq or freq < 1:
        raise InvalidMapError("perturbation frequency must be a positive integer")
    desc = f"perturbed {_fmt_matrix(rows)} eta={float(eta)!r} freq={int(freq)}"
    return MapSpec(
        kind=MapKind.PERTURBED,
        n=len(rows),
        space=space,
        invertible=False,
        matrix=_freeze(rows),
        eta=float(eta),
        freq=int(freq),
        descriptor=desc,
    )


def _fmt_vector(vec) -> str:
    return "[" + ",".join(repr(float(v)) for v in vec) + "]"


def _fmt_matrix(mat) -> str:
    return "[" + ",".join(_fmt_vector(row) for row in mat) + "]"


def _merge_brackets(tokens: list[str]) -> list[str]:
    """Re-join tokens so bracketed literals survive whitespace splitting."""
    merged: list[str] = []
    depth = 0
    for tok in tokens:
        if depth > 0:
            merged[-1] += tok
        else:
            merged.append(tok)
        depth += tok.count("[") - tok.count("]")
        if depth < 0:
            raise InvalidMapError("unbalanced brackets in map descriptor")
    if depth != 0:
        raise InvalidMapError("unbalanced brackets in map descriptor")
    return merged


def _parse_literal(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidMapError(f"cannot parse {text!r}: {exc}") from None


def builtin_map(descriptor: str, space: Space | str = Space.TORUS) -> MapSpec:
    """Parse a one-line map descriptor: kind, then whitespace-separated parameters.

    Grammar:
        identity [n=<int>]
        translation [v1,...,vn]
        toral [[a11,...],...]
        affine [[a11,...],...] [offset=[b1,...,bn]]
        standard K=<real>
        perturbed [[a11,...],...] eta=<real> freq=<int>
    """
    space = parse_space(space)
    tokens = _merge_brackets(descriptor.split())
    if not tokens:
        raise InvalidMapError("empty map descriptor")
    kind, args = tokens[0].lower(), tokens[1:]
    positional = [a for a in args if "=" not in a]
    keyword = {}
    for a in args:
        if "=" in a:
            key, _, value = a.partition("=")
            keyword[key.lower()] = value
    unknown = object()

    def kw(name: str, default=unknown):
        if name in keyword:
            return _parse_literal(keyword.pop(name))
        if default is unknown:
            raise InvalidMapError(f"map kind {kind!r} requires {name}=")
        return default

    def pos(label: str):
        if not positional:
            raise InvalidMapError(f"map kind {kind!r} requires a {label} argument")
        return _parse_literal(positional.pop(0))

    if kind == "identity":
        built = identity_map(n=int(kw("n", 2)), space=space)
    elif kind == "translation":
        built = translation_map(pos("vector"), space=space)
    elif kind == "toral":
        built = toral_map(pos("matrix"), space=space)
    elif kind == "affine":
        matrix = pos("matrix")
        built = affine_map(matrix, kw("offset", None), space=space)
    elif kind == "standard":
        built = standard_map(float(kw("k")), space=space)
    elif kind == "perturbed":
        matrix = pos("matrix")
        built = perturbed_map(matrix, float(kw("eta")), int(kw("freq", 1)), space=space)
    else:
        raise InvalidMapError(f"unknown map kind {kind!r}")
    if positional:
        raise InvalidMapError(f"unexpected arguments: {positional}")
    if keyword:
        raise InvalidMapError(f"unknown parameters: {sorted(keyword)}")
    return built


def _shear_term(f: MapSpec, x: np.ndarray) -> np.ndarray:
    return (f.kappa / TWO_PI) * np.sin(TWO_PI * x)


def _eval_raw(f: MapSpec, direction: Direction, p: np.ndarray) -> np.ndarray:
    """Evaluate without reducing mod 1; callers wrap for Torus."""
    if direction is Direction.INVERSE and not f.invertible:
        raise NotInvertibleError(f"{f.descriptor or f.kind.value} has no inverse")
    if f.kind is MapKind.IDENTITY:
        return p.copy()
    if f.kind is MapKind.TRANSLATION:
        sign = 1.0 if direction is Direction.FORWARD else -1.0
        return p + sign * f.offset_arr
    if f.kind in (MapKind.TORAL, MapKind.AFFINE):
        if direction is Direction.FORWARD:
            return f.matrix_arr @ p + f.offset_arr
        return f.inverse_matrix_arr @ (p - f.offset_arr)
    if f.kind is MapKind.STANDARD:
        x, y = p
        if direction is Direction.FORWARD:
            s = float(_shear_term(f, np.array(x)))
            return np.array([x + y + s, y + s])
        # x' = x + y + s(x), y' = y + s(x) inverts in closed form.
        x0 = x - y
        s = float(_shear_term(f, np.array(x0)))
        return np.array([x0, y - s])
    if f.kind is MapKind.PERTURBED:
        # Component d is perturbed by the cyclically previous coordinate, so
        # the leading component reads the last one.
        wave = f.eta * np.sin(TWO_PI * f.freq * np.roll(p, 1))
        return f.matrix_arr @ p + wave
    raise InvalidMapError(f"unhandled map kind {f.kind}")


def eval_point(f: MapSpec, direction: Direction, point) -> np.ndarray:
    """Apply f (or its inverse) to one point, reduced mod 1 on the torus."""
    p = np.asarray(point, dtype=float)
    if p.shape != (f.n,):
        raise InvalidMapError(f"point has shape {p.shape}, map expects ({f.n},)")
    q = _eval_raw(f, direction, p)
    if f.space is Space.TORUS:
        q = q - np.floor(q)
        q[q == 1.0] = 0.0
    return q


def _interval_shear(f: MapSpec, xlo: float, xhi: float) -> tuple[float, float]:
    slo, shi = sin_range(TWO_PI * xlo, TWO_PI * xhi)
    c = f.kappa / TWO_PI
    lo, hi = (c * slo, c * shi) if c >= 0 else (c * shi, c * slo)
    return widen(lo, hi)


def eval_box(f: MapSpec, direction: Direction, box: Box) -> Lift:
    """Rigorous enclosure of f(box) as an un-wrapped lift.

    Torus wrapping is deliberately left to the caller (``split_lift``) so the
    enclosure itself stays tight.
    """
    if direction is Direction.INVERSE and not f.invertible:
        raise NotInvertibleError(f"{f.descriptor or f.kind.value} has no inverse")
    lo, hi = box.lo_arr, box.hi_arr
    if f.kind is MapKind.IDENTITY:
        out_lo, out_hi = lo.copy(), hi.copy()
    elif f.kind is MapKind.TRANSLATION:
        sign = 1.0 if direction is Direction.FORWARD else -1.0
        out_lo, out_hi = widen(lo + sign * f.offset_arr, hi + sign * f.offset_arr)
    elif f.kind in (MapKind.TORAL, MapKind.AFFINE):
        if direction is Direction.FORWARD:
            out_lo, out_hi = mat_interval(f.matrix_arr, lo, hi)
            out_lo, out_hi = widen(out_lo + f.offset_arr, out_hi + f.offset_arr)
        else:
            out_lo, out_hi = widen(lo - f.offset_arr, hi - f.offset_arr)
            out_lo, out_hi = mat_interval(f.inverse_matrix_arr, out_lo, out_hi)
    elif f.kind is MapKind.STANDARD:
        if direction is Direction.FORWARD:
            slo, shi = _interval_shear(f, lo[0], hi[0])
            out_lo = np.array([lo[0] + lo[1] + slo, lo[1] + slo])
            out_hi = np.array([hi[0] + hi[1] + shi, hi[1] + shi])
        else:
            xlo, xhi = widen(lo[0] - hi[1], hi[0] - lo[1])
            slo, shi = _interval_shear(f, xlo, xhi)
            out_lo = np.array([xlo, lo[1] - shi])
            out_hi = np.array([xhi, hi[1] - slo])
        out_lo, out_hi = widen(out_lo, out_hi)
    elif f.kind is MapKind.PERTURBED:
        out_lo, out_hi = mat_interval(f.matrix_arr, lo, hi)
        wave_lo = np.empty(f.n)
        wave_hi = np.empty(f.n)
        for d in range(f.n):
            src = (d - 1) % f.n
            slo, shi = sin_range(TWO_PI * f.freq * lo[src], TWO_PI * f.freq * hi[src])
            wave_lo[d], wave_hi[d] = f.eta * slo, f.eta * shi
        out_lo, out_hi = widen(out_lo + wave_lo, out_hi + wave_hi)
    else:
        raise InvalidMapError(f"unhandled map kind {f.kind}")
    return Lift(tuple(out_lo), tuple(out_hi), f.space)


def eval_points(f: MapSpec, points: np.ndarray) -> np.ndarray:
    """Forward-evaluate a (k, n) batch of points, reduced mod 1 on the torus."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != f.n:
        raise InvalidMapError(f"batch has shape {p.shape}, expected (k, {f.n})")
    if f.kind is MapKind.IDENTITY:
        q = p.copy()
    elif f.kind is MapKind.TRANSLATION:
        q = p + f.offset_arr
    elif f.kind in (MapKind.TORAL, MapKind.AFFINE):
        q = p @ f.matrix_arr.T + f.offset_arr
    elif f.kind is MapKind.STANDARD:
        s = (f.kappa / TWO_PI) * np.sin(TWO_PI * p[:, 0])
        q = np.stack([p[:, 0] + p[:, 1] + s, p[:, 1] + s], axis=1)
    elif f.kind is MapKind.PERTURBED:
        wave = f.eta * np.sin(TWO_PI * f.freq * np.roll(p, 1, axis=1))
        q = p @ f.matrix_arr.T + wave
    else:
        raise InvalidMapError(f"unhandled map kind {f.kind}")
    if f.space is Space.TORUS:
        q = q - np.floor(q)
        q[q == 1.0] = 0.0
    return q


def linear_part(f: MapSpec, direction: Direction = Direction.FORWARD) -> tuple[np.ndarray, np.ndarray]:
    """Exact-in-floats linear skeleton (A, b) with f(x) = Ax + b + residual."""
    if direction is Direction.INVERSE and not f.invertible:
        raise NotInvertibleError(f"{f.descriptor or f.kind.value} has no inverse")
    n = f.n
    if f.kind is MapKind.IDENTITY:
        return np.eye(n), np.zeros(n)
    if f.kind is MapKind.TRANSLATION:
        sign = 1.0 if direction is Direction.FORWARD else -1.0
        return np.eye(n), sign * f.offset_arr
    if f.kind in (MapKind.TORAL, MapKind.AFFINE, MapKind.STANDARD):
        if direction is Direction.FORWARD:
            return f.matrix_arr, f.offset_arr
        return f.inverse_matrix_arr, -(f.inverse_matrix_arr @ f.offset_arr)
    if f.kind is MapKind.PERTURBED:
        return f.matrix_arr, np.zeros(n)
    raise InvalidMapError(f"unhandled map kind {f.kind}")


def residual_range(
    f: MapSpec, direction: Direction, lo: np.ndarray, hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise bounds on f(x) - (Ax + b) over the box [lo, hi].

    Zero for the exactly-affine kinds; a sine range for the shear and
    perturbation terms.
    """
    n = f.n
    if f.kind in (MapKind.IDENTITY, MapKind.TRANSLATION, MapKind.TORAL, MapKind.AFFINE):
        return np.zeros(n), np.zeros(n)
    if f.kind is MapKind.STANDARD:
        if direction is Direction.FORWARD:
            slo, shi = _interval_shear(f, lo[0], hi[0])
            return np.array([slo, slo]), np.array([shi, shi])
        xlo, xhi = widen(lo[0] - hi[1], hi[0] - lo[1])
        slo, shi = _interval_shear(f, xlo, xhi)
        return np.array([0.0, -shi]), np.array([0.0, -slo])
    if f.kind is MapKind.PERTURBED:
        if direction is Direction.INVERSE:
            raise NotInvertibleError("perturbed maps have no inverse")
        rlo = np.empty(n)
        rhi = np.empty(n)
        for d in range(n):
            src = (d - 1) % n
            slo, shi = sin_range(TWO_PI * f.freq * lo[src], TWO_PI * f.freq * hi[src])
            rlo[d], rhi[d] = f.eta * slo, f.eta * shi
        return rlo, rhi
    raise InvalidMapError(f"unhandled map kind {f.kind}")


def is_exactly_affine(f: MapSpec) -> bool:
    """True when the float evaluation of f is an exact affine map of its inputs."""
    return f.kind in (
        MapKind.IDENTITY,
        MapKind.TRANSLATION,
        MapKind.TORAL,
        MapKind.AFFINE,
    )


def jacobian(f: MapSpec, point, step: float = 1e-6) -> np.ndarray:
    """Derivative matrix at a point: exact for affine kinds, central differences else.

    Differences are taken on the un-wrapped evaluation, so points near the
    torus seam are safe.
    """
    if is_exactly_affine(f):
        return linear_part(f)[0]
    p = np.asarray(point, dtype=float)
    out = np.empty((f.n, f.n))
    for j in range(f.n):
        e = np.zeros(f.n)
        e[j] = step
        out[:, j] = (
            _eval_raw(f, Direction.FORWARD, p + e) - _eval_raw(f, Direction.FORWARD, p - e)
        ) / (2 * step)
    return out


def map_from_json(data: dict) -> MapSpec:
    """Rebuild a MapSpec from its serialized form."""
    return builtin_map(data["descriptor"], data.get("space", Space.TORUS.value))
