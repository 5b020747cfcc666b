"""Fuzzy min-max hyper-box clustering of fused case vectors.

Vectors are sparse ``{cui: score}`` dicts over an ``n``-dimensional space
(the fused vocabulary).  A dimension absent from a box is the degenerate
interval [0, 0]; a dimension absent from a point is coordinate 0.

Only the expansion phase is implemented.  Boxes may overlap, which costs
pruning efficiency but never correctness, since every box with non-zero
membership is searched.

:func:`membership`, :func:`can_expand` and :func:`sensitivity` are the
per-box reference definitions.  :func:`train` and :func:`relevant_boxes`
evaluate the same quantities for all boxes at once on dense column arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._io import atomic_write_text, read_lines
from .concept_model import ConceptId
from .errors import DomainError, ParseError

DEFAULT_ETA_FALLBACK = 0.01
MODEL_FORMAT = "semfusion-fmm/1"


def ramp(d, eta):
    """0 for d <= 0, d/eta on (0, eta], 1 beyond eta."""
    if d <= 0.0:
        return 0.0
    if d > eta:
        return 1.0
    return d / eta


def _ramp(d, eta):
    return np.clip(d / eta, 0.0, 1.0)


@dataclass(frozen=True)
class HyperBox:
    v: dict
    u: dict
    eta: float
    members: tuple = ()

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta!r}")
        for i, lo in self.v.items():
            hi = self.u.get(i, 0.0)
            if not 0.0 <= lo <= hi <= 1.0:
                raise DomainError(f"box dimension {i}: [{lo}, {hi}] is not a sub-interval of [0, 1]")
        for i, hi in self.u.items():
            if not 0.0 <= hi <= 1.0:
                raise DomainError(f"box dimension {i}: max {hi} outside [0, 1]")

    def contains(self, x):
        """True iff ``v <= x <= u`` in every dimension explicit in the box or the point."""
        for i in set(self.u) | set(x):
            xi = x.get(i, 0.0)
            if not self.v.get(i, 0.0) <= xi <= self.u.get(i, 0.0):
                return False
        return True


@dataclass(frozen=True)
class BoxModel:
    boxes: tuple
    theta: float
    n: int
    presentation_order: tuple
    eta_fallback: float = DEFAULT_ETA_FALLBACK
    manifest: str = None

    def member_ids(self):
        return [m for box in self.boxes for m in box.members]

    @cached_property
    def _dense(self):
        dims = sorted({i for box in self.boxes for i in box.u})
        col = {c: k for k, c in enumerate(dims)}
        b = len(self.boxes)
        ut = np.zeros((len(dims), b))
        vt = np.zeros((len(dims), b))
        for j, box in enumerate(self.boxes):
            for i, val in box.u.items():
                ut[col[i], j] = val
            for i, val in box.v.items():
                vt[col[i], j] = val
        eta = np.array([box.eta for box in self.boxes])
        sv = _ramp(vt, eta).sum(axis=0)
        return col, ut, vt, eta, sv


def _check_unit_vector(x):
    for i, xi in x.items():
        if not 0.0 <= xi <= 1.0:
            raise DomainError(f"coordinate {i}={xi!r} outside [0, 1]")


def sensitivity(points, fallback=DEFAULT_ETA_FALLBACK):
    """Smallest per-dimension spread of ``points`` divided by ``2 (N - 1)``.

    Dimensions with zero spread are skipped; ``fallback`` is returned for a
    single point or when every dimension has zero spread.
    """
    if not fallback > 0:
        raise DomainError(f"fallback must be positive, got {fallback!r}")
    points = list(points)
    if not points:
        raise DomainError("sensitivity of an empty point set")
    if len(points) < 2:
        return fallback
    dims = set()
    for p in points:
        dims.update(p)
    best = None
    for i in dims:
        coords = [p.get(i, 0.0) for p in points]
        spread = max(coords) - min(coords)
        if spread > 0.0 and (best is None or spread < best):
            best = spread
    if best is None:
        return fallback
    return best / (2 * (len(points) - 1))


def membership(box: HyperBox, x, n):
    """Degree in [0, 1] to which point ``x`` belongs to ``box``."""
    dims = set(box.u) | set(x)
    if n < len(dims):
        raise DomainError(f"n={n} is below the {len(dims)} explicit dimensions")
    penalty = 0.0
    for i in sorted(dims):
        xi = x.get(i, 0.0)
        penalty += ramp(xi - box.u.get(i, 0.0), box.eta) + ramp(box.v.get(i, 0.0) - xi, box.eta)
    return (n - penalty) / n


def can_expand(box: HyperBox, x, theta, n):
    """True iff the box grown to cover ``x`` has total extent at most ``n * theta``."""
    extent = 0.0
    for i in sorted(set(box.u) | set(x)):
        xi = x.get(i, 0.0)
        extent += max(box.u.get(i, 0.0), xi) - min(box.v.get(i, 0.0), xi)
    return extent <= n * theta


class _Trainer:
    """Column-major box state; one column per box."""

    def __init__(self, n_dims, eta_fallback, capacity=64):
        self.n_dims = n_dims
        self.fallback = eta_fallback
        self.ut = np.zeros((n_dims, capacity))
        self.vt = np.zeros((n_dims, capacity))
        self.eta = np.zeros(capacity)
        self.extent = np.zeros(capacity)
        self.sv = np.zeros(capacity)
        self.count = np.zeros(capacity, dtype=np.int64)
        self.members = []

    @property
    def size(self):
        return len(self.members)

    def _grow(self):
        cap = 2 * self.ut.shape[1]
        for name in ("ut", "vt"):
            old = getattr(self, name)
            new = np.zeros((self.n_dims, cap))
            new[:, : old.shape[1]] = old
            setattr(self, name, new)
        for name in ("eta", "extent", "sv", "count"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: old.size] = old
            setattr(self, name, new)

    def scores(self, cols, vals, n, theta):
        """Membership and expandability of the point against every box."""
        b = self.size
        u = self.ut[cols, :b]
        v = self.vt[cols, :b]
        eta = self.eta[:b]
        x = vals[:, None]
        penalty = (_ramp(x - u, eta) + _ramp(v - x, eta)).sum(axis=0)
        penalty += self.sv[:b] - _ramp(v, eta).sum(axis=0)
        h = (n - penalty) / n
        grown = (np.maximum(u, x) - np.minimum(v, x) - (u - v)).sum(axis=0)
        ok = self.extent[:b] + grown <= n * theta
        return h, ok

    def _refresh(self, j):
        u = self.ut[:, j]
        v = self.vt[:, j]
        spread = u - v
        positive = spread[spread > 0.0]
        count = int(self.count[j])
        if count < 2 or positive.size == 0:
            eta = self.fallback
        else:
            eta = positive.min() / (2 * (count - 1))
        self.eta[j] = eta
        self.extent[j] = spread.sum()
        self.sv[j] = _ramp(v, eta).sum()

    def absorb(self, j, cols, vals, case_id):
        u = self.ut[:, j]
        v = self.vt[:, j]
        new_v = np.zeros(self.n_dims)
        new_v[cols] = np.minimum(v[cols], vals)
        v[:] = new_v
        u[cols] = np.maximum(u[cols], vals)
        self.count[j] += 1
        self.members[j].append(case_id)
        self._refresh(j)

    def open(self, cols, vals, case_id):
        if self.size == self.ut.shape[1]:
            self._grow()
        j = self.size
        self.ut[cols, j] = vals
        self.vt[cols, j] = vals
        self.count[j] = 1
        self.members.append([case_id])
        self._refresh(j)


def train(fused, theta, eta_fallback=DEFAULT_ETA_FALLBACK):
    """Single pass of FMM expansion over ``fused`` in list order.

    Each point goes to the box of highest membership (lowest index on ties)
    among those that can expand to cover it; if none can, it seeds a new box.
    """
    fused = list(fused)
    if not fused:
        raise DomainError("cannot cluster an empty corpus")
    if not 0.0 < theta <= 1.0:
        raise DomainError(f"theta={theta!r} outside (0, 1]")
    if not eta_fallback > 0:
        raise DomainError(f"eta_fallback must be positive, got {eta_fallback!r}")
    dims = sorted({cui for fc in fused for cui in fc.entries})
    col = {c: k for k, c in enumerate(dims)}
    n = len(dims)
    state = _Trainer(n, eta_fallback)
    for fc in fused:
        x = fc.vector()
        _check_unit_vector(x)
        cols = np.fromiter((col[c] for c in x), dtype=np.int64, count=len(x))
        vals = np.fromiter(x.values(), dtype=float, count=len(x))
        if state.size:
            h, ok = state.scores(cols, vals, n, theta)
            if ok.any():
                j = int(np.argmax(np.where(ok, h, -np.inf)))
                state.absorb(j, cols, vals, fc.case_id)
                continue
        state.open(cols, vals, fc.case_id)

    boxes = []
    for j in range(state.size):
        u_col = state.ut[:, j]
        v_col = state.vt[:, j]
        u = {dims[k]: float(u_col[k]) for k in np.flatnonzero(u_col)}
        v = {dims[k]: float(v_col[k]) for k in np.flatnonzero(v_col)}
        boxes.append(HyperBox(v, u, float(state.eta[j]), tuple(state.members[j])))
    return BoxModel(
        tuple(boxes), float(theta), n, tuple(fc.case_id for fc in fused), float(eta_fallback)
    )


def effective_n(model: BoxModel, query):
    """Dimensionality for scoring ``query``: ``n``, widened if the query adds dimensions."""
    col = model._dense[0]
    return max(model.n, len(col) + sum(1 for c in query if c not in col))


def memberships(model: BoxModel, query):
    """Membership of ``query`` in every box of ``model``, as an array."""
    _check_unit_vector(query)
    col, ut, vt, eta, sv = model._dense
    n = effective_n(model, query)
    cols = np.array([col[c] for c in query if c in col], dtype=np.int64)
    x = np.array([val for c, val in query.items() if c in col])[:, None]
    u = ut[cols]
    v = vt[cols]
    penalty = (_ramp(x - u, eta) + _ramp(v - x, eta)).sum(axis=0)
    penalty += sv - _ramp(v, eta).sum(axis=0)
    for c, val in query.items():
        if c not in col:
            penalty += _ramp(val, eta)
    return (n - penalty) / n


def relevant_boxes(model: BoxModel, query):
    """Boxes with membership > 0 for ``query``, by descending membership."""
    h = memberships(model, query)
    order = sorted(np.flatnonzero(h > 0.0), key=lambda j: (-h[j], j))
    return [model.boxes[j] for j in order]


# -- model files -----------------------------------------------------------------


def format_model(model: BoxModel):
    header = {
        "format": MODEL_FORMAT,
        "theta": model.theta,
        "n": model.n,
        "eta_fallback": model.eta_fallback,
        "manifest": model.manifest,
        "presentation_order": list(model.presentation_order),
    }
    lines = [json.dumps(header)]
    for box in model.boxes:
        lines.append(json.dumps({
            "eta": box.eta,
            "members": list(box.members),
            "v": {str(k): box.v[k] for k in sorted(box.v)},
            "u": {str(k): box.u[k] for k in sorted(box.u)},
        }))
    return "".join(line + "\n" for line in lines)


def write_model(model: BoxModel, path):
    atomic_write_text(path, format_model(model))


def parse_model(path):
    header = None
    boxes = []
    for lineno, line in read_lines(path):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
        try:
            if header is None:
                if rec.get("format") != MODEL_FORMAT:
                    raise ParseError(f"not a {MODEL_FORMAT} model file", lineno)
                header = rec
                continue
            boxes.append(HyperBox(
                {ConceptId(k): float(val) for k, val in rec["v"].items()},
                {ConceptId(k): float(val) for k, val in rec["u"].items()},
                float(rec["eta"]),
                tuple(rec["members"]),
            ))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed model record: {exc!r}", lineno) from None
    if header is None:
        raise ParseError("empty model file")
    try:
        return BoxModel(
            tuple(boxes),
            float(header["theta"]),
            int(header["n"]),
            tuple(header["presentation_order"]),
            float(header["eta_fallback"]),
            header.get("manifest"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model header: {exc!r}") from None
