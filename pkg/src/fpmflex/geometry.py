"""Point clouds, polygonal subdomain partitions and boundary bookkeeping.

A partition is the meshless analogue of a mesh: one Point per subdomain,
subdomains tile the domain exactly, and every polygon edge is either an
internal boundary shared by two subdomains or a tagged external boundary
segment.  Partitions are immutable after construction and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi

from .errors import InvalidInputError, MeshParseError

_AREA_TOL = 1e-10


@dataclass(frozen=True)
class Point:
    """A fragile point: the solver unknowns (u1, u2, phi) live here."""

    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Subdomain:
    """Polygonal subdomain containing exactly one Point.

    ``vertex_ids`` is counterclockwise; ``area`` is the shoelace area.
    """

    id: int
    point_id: int
    vertex_ids: tuple
    area: float


@dataclass(frozen=True)
class InternalBoundary:
    """Edge shared by two subdomains; normal points left -> right."""

    id: int
    v1: int
    v2: int
    left_subdomain: int
    right_subdomain: int
    length: float
    normal: tuple


@dataclass(frozen=True)
class BoundarySegment:
    """Edge of a single subdomain lying on the domain boundary."""

    id: int
    v1: int
    v2: int
    owner_subdomain: int
    tag: str
    length: float
    normal: tuple


# ---------------------------------------------------------------------------
# domain descriptors for the structured generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rectangle:
    x0: float = 0.0
    y0: float = 0.0
    width: float = 1.0
    height: float = 1.0
    points_on_boundary: bool = False


@dataclass(frozen=True)
class AnnulusQuadrant:
    r_inner: float
    r_outer: float
    theta0: float = 0.0
    theta1: float = math.pi / 2.0


@dataclass(frozen=True)
class Trapezoid:
    """Symmetric trapezoid: bottom edge y=0 width ``bottom``, top width ``top``."""

    bottom: float
    top: float
    height: float


def _polygon_area(coords):
    x = coords[:, 0]
    y = coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _polygon_centroid(coords):
    x = coords[:, 0]
    y = coords[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    a = 0.5 * cross.sum()
    cx = float(((x + np.roll(x, -1)) * cross).sum() / (6.0 * a))
    cy = float(((y + np.roll(y, -1)) * cross).sum() / (6.0 * a))
    return cx, cy


def point_in_polygon(px, py, coords):
    """Even-odd rule; points on the boundary count as inside."""
    n = len(coords)
    inside = False
    for i in range(n):
        x1, y1 = coords[i]
        x2, y2 = coords[(i + 1) % n]
        # on-segment check
        dx, dy = x2 - x1, y2 - y1
        cross = dx * (py - y1) - dy * (px - x1)
        seg_len2 = dx * dx + dy * dy
        if seg_len2 > 0 and abs(cross) < 1e-12 * max(seg_len2, 1.0):
            t = ((px - x1) * dx + (py - y1) * dy) / seg_len2
            if -1e-12 <= t <= 1 + 1e-12:
                return True
        if (y1 > py) != (y2 > py):
            xin = x1 + (py - y1) * dx / dy
            if px < xin:
                inside = not inside
    return inside


class Partition:
    """Immutable point cloud + polygonal tiling with boundary bookkeeping.

    Attributes
    ----------
    points_xy : (N, 2) float array of Point coordinates.
    vertices : (M, 2) float array of polygon corner coordinates.
    subdomains, internal_boundaries, external_boundaries : record lists.
    h : mean distance between the Points adjacent to each internal boundary.
    """

    def __init__(self, points_xy, vertices, cells, boundary_tagger, domain=None):
        """Build the partition from raw cells.

        ``cells`` maps subdomain id -> CCW tuple of vertex ids (one cell per
        point, same order).  ``boundary_tagger(x, y, nx, ny)`` names external
        edges by their midpoint and outward normal.
        """
        points_xy = np.asarray(points_xy, dtype=float)
        vertices = np.asarray(vertices, dtype=float)
        if not np.all(np.isfinite(points_xy)):
            raise InvalidInputError("non-finite point coordinates")
        if len(cells) != len(points_xy):
            raise InvalidInputError("one subdomain per point required")

        self.points_xy = points_xy
        self.vertices = vertices
        self.domain = domain

        subs = []
        for sid, vids in enumerate(cells):
            coords = vertices[list(vids)]
            area = _polygon_area(coords)
            if area <= 0.0:
                raise InvalidInputError(
                    f"subdomain {sid} degenerate or not counterclockwise (area={area:g})"
                )
            subs.append(Subdomain(sid, sid, tuple(int(v) for v in vids), area))
        self.subdomains = subs

        # classify edges: shared -> internal, single-owner -> external
        edge_owner = {}
        internal = []
        external_raw = []
        for s in subs:
            vids = s.vertex_ids
            for a, b in zip(vids, vids[1:] + vids[:1]):
                key = (a, b) if a < b else (b, a)
                if key in edge_owner:
                    other, oa, ob = edge_owner.pop(key)
                    # the first owner traversed a->b CCW, so it sits on the left
                    internal.append((oa, ob, other, s.id))
                else:
                    edge_owner[key] = (s.id, a, b)

        self.internal_boundaries = []
        for eid, (a, b, left, right) in enumerate(internal):
            d = vertices[b] - vertices[a]
            length = float(np.hypot(d[0], d[1]))
            if length <= 0.0:
                raise InvalidInputError("zero-length internal boundary")
            normal = (float(d[1] / length), float(-d[0] / length))
            self.internal_boundaries.append(
                InternalBoundary(eid, int(a), int(b), left, right, length, normal)
            )

        self.external_boundaries = []
        for eid, (owner, a, b) in enumerate(edge_owner.values()):
            d = vertices[b] - vertices[a]
            length = float(np.hypot(d[0], d[1]))
            normal = (float(d[1] / length), float(-d[0] / length))
            mid = 0.5 * (vertices[a] + vertices[b])
            tag = boundary_tagger(float(mid[0]), float(mid[1]), normal[0], normal[1])
            if not tag:
                tag = "boundary"
            self.external_boundaries.append(
                BoundarySegment(eid, int(a), int(b), owner, tag, length, normal)
            )

        if self.internal_boundaries:
            d = [
                np.hypot(*(points_xy[e.left_subdomain] - points_xy[e.right_subdomain]))
                for e in self.internal_boundaries
            ]
            self.h = float(np.mean(d))
        else:
            self.h = float("nan")

        self._edges_by_vertex = None
        self._subs_by_point = {s.point_id: s for s in subs}

    # -- convenience views -------------------------------------------------

    @property
    def points(self):
        return [Point(i, float(x), float(y)) for i, (x, y) in enumerate(self.points_xy)]

    @property
    def n_points(self):
        return len(self.points_xy)

    def subdomain_polygon(self, sid):
        return self.vertices[list(self.subdomains[sid].vertex_ids)]

    def total_area(self):
        return float(sum(s.area for s in self.subdomains))

    def outline_area(self):
        """Area enclosed by the external boundary loop(s), signed shoelace sum."""
        acc = 0.0
        for seg in self.external_boundaries:
            x1, y1 = self.vertices[seg.v1]
            x2, y2 = self.vertices[seg.v2]
            # external edges are traversed CCW by their owner
            acc += 0.5 * (x1 * y2 - x2 * y1)
        return float(acc)

    def edges_at_vertex(self):
        """vertex id -> list of internal boundary ids (cached)."""
        if self._edges_by_vertex is None:
            table = {}
            for e in self.internal_boundaries:
                table.setdefault(e.v1, []).append(e.id)
                table.setdefault(e.v2, []).append(e.id)
            self._edges_by_vertex = table
        return self._edges_by_vertex

    def boundary_tags(self):
        return sorted({seg.tag for seg in self.external_boundaries})

    def containing_subdomain(self, x, y):
        """Lowest-id subdomain whose polygon contains (x, y); None if outside."""
        for s in self.subdomains:
            if point_in_polygon(x, y, self.vertices[list(s.vertex_ids)]):
                return s.id
        return None


# ---------------------------------------------------------------------------
# structured generators
# ---------------------------------------------------------------------------


def _tensor_cells(nx, ny):
    cells = []
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            cells.append((v00, v10, v11, v01))
    return cells


def tensor_partition(xcoords, ycoords, tagger=None, points="centroid", domain=None):
    """Tensor-product quad partition from 1D coordinate arrays.

    ``points`` is "centroid" or an (nx*ny, 2) array of point positions
    (row-major, x fastest).
    """
    xcoords = np.asarray(xcoords, dtype=float)
    ycoords = np.asarray(ycoords, dtype=float)
    nx, ny = len(xcoords) - 1, len(ycoords) - 1
    if nx < 1 or ny < 1 or np.any(np.diff(xcoords) <= 0) or np.any(np.diff(ycoords) <= 0):
        raise InvalidInputError("degenerate tensor grid")
    gx, gy = np.meshgrid(xcoords, ycoords)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])
    cells = _tensor_cells(nx, ny)
    if isinstance(points, str) and points == "centroid":
        cx = 0.5 * (xcoords[:-1] + xcoords[1:])
        cy = 0.5 * (ycoords[:-1] + ycoords[1:])
        px, py = np.meshgrid(cx, cy)
        pts = np.column_stack([px.ravel(), py.ravel()])
    else:
        pts = np.asarray(points, dtype=float)
    if tagger is None:
        x0, x1 = xcoords[0], xcoords[-1]
        y0, y1 = ycoords[0], ycoords[-1]
        tagger = _rect_tagger(x0, x1, y0, y1)
    return Partition(pts, vertices, cells, tagger, domain=domain)


def _rect_tagger(x0, x1, y0, y1):
    tol = 1e-9 * max(x1 - x0, y1 - y0)

    def tagger(x, y, nx, ny):
        if abs(x - x0) < tol and nx < 0:
            return "left"
        if abs(x - x1) < tol and nx > 0:
            return "right"
        if abs(y - y0) < tol and ny < 0:
            return "bottom"
        if abs(y - y1) < tol and ny > 0:
            return "top"
        return "boundary"

    return tagger


def generate_structured(domain, nx, ny):
    """Structured quadrilateral partition of a rectangle, quarter annulus or
    trapezoid with one Point per subdomain.

    For rectangles with ``points_on_boundary`` the Points sit on a tensor grid
    that includes the domain edges and the subdomains are the Voronoi-midline
    cells of that grid.
    """
    if nx < 2 or ny < 2:
        raise InvalidInputError("nx, ny >= 2 required")

    if isinstance(domain, Rectangle):
        if domain.width <= 0 or domain.height <= 0:
            raise InvalidInputError("rectangle with zero width or height")
        x1 = domain.x0 + domain.width
        y1 = domain.y0 + domain.height
        if domain.points_on_boundary:
            pxs = np.linspace(domain.x0, x1, nx)
            pys = np.linspace(domain.y0, y1, ny)
            xcuts = np.concatenate([[domain.x0], 0.5 * (pxs[:-1] + pxs[1:]), [x1]])
            ycuts = np.concatenate([[domain.y0], 0.5 * (pys[:-1] + pys[1:]), [y1]])
            gx, gy = np.meshgrid(pxs, pys)
            pts = np.column_stack([gx.ravel(), gy.ravel()])
            return tensor_partition(xcuts, ycuts, points=pts, domain=domain)
        xs = np.linspace(domain.x0, x1, nx + 1)
        ys = np.linspace(domain.y0, y1, ny + 1)
        return tensor_partition(xs, ys, domain=domain)

    if isinstance(domain, AnnulusQuadrant):
        if domain.r_inner <= 0 or domain.r_outer <= domain.r_inner:
            raise InvalidInputError("annulus radii must satisfy 0 < r_inner < r_outer")
        # nx radial divisions, ny angular divisions
        rs = np.linspace(domain.r_inner, domain.r_outer, nx + 1)
        ths = np.linspace(domain.theta0, domain.theta1, ny + 1)
        gr, gt = np.meshgrid(rs, ths)
        vertices = np.column_stack([(gr * np.cos(gt)).ravel(), (gr * np.sin(gt)).ravel()])
        cells = _tensor_cells(nx, ny)
        pts = np.array(
            [_polygon_centroid(vertices[list(c)]) for c in cells], dtype=float
        )
        def tagger(x, y, nxn, nyn):
            r = math.hypot(x, y)
            th = math.atan2(y, x)
            if abs(th - domain.theta0) < 1e-9:
                return "theta_min"
            if abs(th - domain.theta1) < 1e-9:
                return "theta_max"
            return "inner" if r < 0.5 * (domain.r_inner + domain.r_outer) else "outer"

        return Partition(pts, vertices, cells, tagger, domain=domain)

    if isinstance(domain, Trapezoid):
        if domain.bottom <= 0 or domain.top <= 0 or domain.height <= 0:
            raise InvalidInputError("trapezoid with nonpositive dimension")
        xi = np.linspace(-0.5, 0.5, nx + 1)
        eta = np.linspace(0.0, 1.0, ny + 1)
        ge, gxi = np.meshgrid(eta, xi, indexing="ij")
        width = domain.bottom + (domain.top - domain.bottom) * ge
        vertices = np.column_stack([(gxi * width).ravel(), (ge * domain.height).ravel()])
        cells = _tensor_cells(nx, ny)
        pts = np.array(
            [_polygon_centroid(vertices[list(c)]) for c in cells], dtype=float
        )
        tol = 1e-9 * max(domain.bottom, domain.top, domain.height)

        def tagger(x, y, nxn, nyn):
            if abs(y) < tol:
                return "bottom"
            if abs(y - domain.height) < tol:
                return "top"
            return "left" if x < 0 else "right"

        return Partition(pts, vertices, cells, tagger, domain=domain)

    raise InvalidInputError(f"unsupported domain descriptor {type(domain).__name__}")


def graded_coords(a, b, n, focus, power=2.0):
    """1D grid on [a, b] with cells shrinking toward ``focus`` (power-law).

    ``power`` = 1 gives a uniform grid; larger values concentrate more cells
    near the focus.  The focus is clamped into [a, b] and always lands on a
    grid line when it is interior.
    """
    if n < 1:
        raise InvalidInputError("n >= 1 required")
    focus = min(max(focus, a), b)
    tf = (focus - a) / (b - a)
    n_left = int(round(n * tf))
    n_left = min(max(n_left, 0 if tf < 1e-12 else 1), n if tf > 1 - 1e-12 else n - 1)
    n_right = n - n_left
    coords = []
    if n_left:
        s = np.linspace(0.0, 1.0, n_left + 1) ** power
        coords.append(focus - s[::-1] * (focus - a))
    else:
        coords.append(np.array([a]))
    if n_right:
        s = np.linspace(0.0, 1.0, n_right + 1) ** power
        coords.append(focus + s[1:] * (b - focus))
    out = np.concatenate(coords)
    out[0], out[-1] = a, b
    return out


def retag_segments(partition, predicate, new_tag):
    """Rename external boundary tags where ``predicate(x, y, tag)`` holds at
    the segment midpoint.  Mutates the (pre-assembly) partition in place."""
    newsegs = []
    for seg in partition.external_boundaries:
        mid = 0.5 * (partition.vertices[seg.v1] + partition.vertices[seg.v2])
        tag = new_tag if predicate(float(mid[0]), float(mid[1]), seg.tag) else seg.tag
        newsegs.append(
            BoundarySegment(seg.id, seg.v1, seg.v2, seg.owner_subdomain, tag, seg.length, seg.normal)
        )
    partition.external_boundaries = newsegs
    return partition


def punch_hole(partition, inside_fn, hole_tag="hole"):
    """Remove subdomains whose point satisfies ``inside_fn(x, y)``.

    Exposed internal edges become external boundary segments tagged
    ``hole_tag``.  Point/subdomain ids are renumbered densely.
    """
    keep = [
        s.id
        for s in partition.subdomains
        if not inside_fn(*partition.points_xy[s.point_id])
    ]
    if len(keep) == len(partition.subdomains):
        return partition
    if not keep:
        raise InvalidInputError("hole removes every subdomain")
    keep_set = set(keep)
    old2new = {old: new for new, old in enumerate(keep)}
    pts = partition.points_xy[keep]
    cells = [partition.subdomains[old].vertex_ids for old in keep]

    # tag map for surviving external edges, keyed by vertex pair
    tag_by_edge = {}
    for seg in partition.external_boundaries:
        if seg.owner_subdomain in keep_set:
            key = (seg.v1, seg.v2) if seg.v1 < seg.v2 else (seg.v2, seg.v1)
            tag_by_edge[key] = seg.tag

    part = Partition(pts, partition.vertices, cells, lambda x, y, nx, ny: "", domain=None)
    # re-tag: inherit old tags, new exposures get hole_tag
    newsegs = []
    for seg in part.external_boundaries:
        key = (seg.v1, seg.v2) if seg.v1 < seg.v2 else (seg.v2, seg.v1)
        tag = tag_by_edge.get(key, hole_tag)
        newsegs.append(
            BoundarySegment(seg.id, seg.v1, seg.v2, seg.owner_subdomain, tag, seg.length, seg.normal)
        )
    part.external_boundaries = newsegs
    part.domain = partition.domain
    return part


# ---------------------------------------------------------------------------
# Voronoi partitions of scattered points (rectangle domains)
# ---------------------------------------------------------------------------


def voronoi_partition(points_xy, rect):
    """Clipped Voronoi cells of ``points_xy`` inside a Rectangle.

    Clipping uses boundary mirroring: every point is reflected across each
    of the four edges, so the original cells come out exactly clipped and
    adjacent cells share ridge vertices bit-identically.
    """
    points_xy = np.asarray(points_xy, dtype=float)
    n = len(points_xy)
    x0, y0 = rect.x0, rect.y0
    x1, y1 = rect.x0 + rect.width, rect.y0 + rect.height
    tol = 1e-9 * max(rect.width, rect.height)
    if np.any(points_xy[:, 0] < x0 - tol) or np.any(points_xy[:, 0] > x1 + tol):
        raise InvalidInputError("point outside rectangle")
    if np.any(
        (np.abs(points_xy[:, 0] - x0) < tol)
        | (np.abs(points_xy[:, 0] - x1) < tol)
        | (np.abs(points_xy[:, 1] - y0) < tol)
        | (np.abs(points_xy[:, 1] - y1) < tol)
    ):
        raise InvalidInputError("Voronoi partition requires strictly interior points")

    mirrors = []
    for m in range(4):
        ref = points_xy.copy()
        if m == 0:
            ref[:, 0] = 2 * x0 - ref[:, 0]
        elif m == 1:
            ref[:, 0] = 2 * x1 - ref[:, 0]
        elif m == 2:
            ref[:, 1] = 2 * y0 - ref[:, 1]
        else:
            ref[:, 1] = 2 * y1 - ref[:, 1]
        mirrors.append(ref)
    allpts = np.vstack([points_xy] + mirrors)
    vor = Voronoi(allpts)

    cells = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise InvalidInputError("unbounded Voronoi cell (degenerate input)")
        coords = vor.vertices[region]
        if _polygon_area(coords) < 0:
            region = region[::-1]
        cells.append(tuple(int(v) for v in region))

    return Partition(
        points_xy,
        vor.vertices,
        cells,
        _rect_tagger(x0, x1, y0, y1),
        domain=rect,
    )


def random_perturb(partition, magnitude, seed):
    """Deterministically displace interior points and rebuild the partition.

    Displacements are uniform in a disk of radius ``magnitude * h``.  If the
    tessellation collapses the magnitude is halved, up to 5 attempts.
    """
    if not (0.0 <= magnitude < 0.5):
        raise InvalidInputError("magnitude must be in [0, 0.5)")
    rect = partition.domain
    if not isinstance(rect, Rectangle):
        raise InvalidInputError("random_perturb supports rectangle-domain partitions")
    if magnitude == 0.0:
        return partition

    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=partition.n_points)
    rad = np.sqrt(rng.uniform(0.0, 1.0, size=partition.n_points))

    x0, y0 = rect.x0, rect.y0
    x1, y1 = rect.x0 + rect.width, rect.y0 + rect.height
    tol = 1e-9 * max(rect.width, rect.height)
    onb = (
        (np.abs(partition.points_xy[:, 0] - x0) < tol)
        | (np.abs(partition.points_xy[:, 0] - x1) < tol)
        | (np.abs(partition.points_xy[:, 1] - y0) < tol)
        | (np.abs(partition.points_xy[:, 1] - y1) < tol)
    )
    if onb.any():
        raise InvalidInputError("random_perturb requires interior points only")

    mag = magnitude
    last_err = None
    for _ in range(5):
        dx = mag * partition.h * rad * np.cos(theta)
        dy = mag * partition.h * rad * np.sin(theta)
        pts = partition.points_xy + np.column_stack([dx, dy])
        pts[:, 0] = np.clip(pts[:, 0], x0 + tol * 10, x1 - tol * 10)
        pts[:, 1] = np.clip(pts[:, 1], y0 + tol * 10, y1 - tol * 10)
        try:
            return voronoi_partition(pts, rect)
        except (InvalidInputError, Exception) as err:  # qhull errors included
            last_err = err
            mag *= 0.5
    raise InvalidInputError(f"perturbation kept collapsing the partition: {last_err}")


# ---------------------------------------------------------------------------
# mesh file ingestion / export
# ---------------------------------------------------------------------------


def _is_convex(coords):
    n = len(coords)
    sign = 0.0
    for i in range(n):
        a, b, c = coords[i], coords[(i + 1) % n], coords[(i + 2) % n]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cr) < 1e-14:
            continue
        if sign == 0.0:
            sign = cr
        elif sign * cr < 0:
            return False
    return True


def ingest_mesh(path):
    """Read a quad/tri mesh file and convert it into a Partition.

    Format: ``NODES`` (id x y per line), ``ELEMENTS`` (id n1 n2 n3 [n4]),
    optional ``TAG <name>`` sections with (element_id local_edge) pairs.
    One Point is placed at each element centroid.
    """
    nodes = {}
    elements = {}
    tags = []  # (name, element_id, local_edge)
    section = None
    tagname = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            upper = line.upper()
            if upper == "NODES":
                section = "nodes"
                continue
            if upper == "ELEMENTS":
                section = "elements"
                continue
            if upper.startswith("TAG"):
                parts = line.split(None, 1)
                if len(parts) != 2 or not parts[1].strip():
                    raise MeshParseError("TAG section without a name", lineno)
                section = "tag"
                tagname = parts[1].strip()
                continue
            if upper == "BOUNDARIES":
                section = "skip"
                continue
            fields = line.split()
            if section == "nodes":
                if len(fields) != 3:
                    raise MeshParseError("expected 'id x y'", lineno)
                try:
                    nid = int(fields[0])
                    x, y = float(fields[1]), float(fields[2])
                except ValueError:
                    raise MeshParseError("malformed node line", lineno)
                if nid in nodes:
                    raise MeshParseError(f"duplicate node id {nid}", lineno)
                nodes[nid] = (x, y)
            elif section == "elements":
                if len(fields) not in (4, 5):
                    raise MeshParseError("expected 'id n1 n2 n3 [n4]'", lineno)
                try:
                    eid = int(fields[0])
                    conn = [int(f) for f in fields[1:]]
                except ValueError:
                    raise MeshParseError("malformed element line", lineno)
                if eid in elements:
                    raise MeshParseError(f"duplicate element id {eid}", lineno)
                for nid in conn:
                    if nid not in nodes:
                        raise MeshParseError(f"element references unknown node {nid}", lineno)
                elements[eid] = conn
            elif section == "tag":
                if len(fields) != 2:
                    raise MeshParseError("expected 'element_id local_edge'", lineno)
                try:
                    tags.append((tagname, int(fields[0]), int(fields[1])))
                except ValueError:
                    raise MeshParseError("malformed tag line", lineno)
            elif section == "skip":
                continue
            else:
                raise MeshParseError("content before a section header", lineno)

    if not elements:
        raise MeshParseError("no elements found", None)

    node_ids = sorted(nodes)
    nid2v = {nid: k for k, nid in enumerate(node_ids)}
    vertices = np.array([nodes[nid] for nid in node_ids], dtype=float)

    elem_ids = sorted(elements)
    eid2s = {eid: k for k, eid in enumerate(elem_ids)}
    cells = []
    pts = []
    for eid in elem_ids:
        vids = [nid2v[n] for n in elements[eid]]
        coords = vertices[vids]
        if _polygon_area(coords) < 0:
            vids = vids[::-1]
            coords = vertices[vids]
        if _polygon_area(coords) <= 0:
            raise InvalidInputError(f"element {eid} degenerate")
        if not _is_convex(coords):
            raise InvalidInputError(f"element {eid} is not convex")
        cells.append(tuple(vids))
        pts.append(_polygon_centroid(coords))

    tag_by_edge = {}
    for name, eid, ledge in tags:
        if eid not in elements:
            raise InvalidInputError(f"tag '{name}' references unknown element {eid}")
        conn = cells[eid2s[eid]]
        if not (0 <= ledge < len(conn)):
            raise InvalidInputError(f"tag '{name}' references bad local edge {ledge}")
        a, b = conn[ledge], conn[(ledge + 1) % len(conn)]
        tag_by_edge[(min(a, b), max(a, b))] = name

    part = Partition(
        np.asarray(pts), vertices, cells, lambda x, y, nx, ny: "boundary", domain=None
    )
    if tag_by_edge:
        newsegs = []
        for seg in part.external_boundaries:
            key = (min(seg.v1, seg.v2), max(seg.v1, seg.v2))
            tag = tag_by_edge.get(key, seg.tag)
            newsegs.append(
                BoundarySegment(
                    seg.id, seg.v1, seg.v2, seg.owner_subdomain, tag, seg.length, seg.normal
                )
            )
        part.external_boundaries = newsegs
    return part


def export_partition(partition, path):
    """Write the partition in the mesh-file format plus a BOUNDARIES section."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("NODES\n")
        for i, (x, y) in enumerate(partition.vertices):
            fh.write(f"{i} {x!r} {y!r}\n")
        fh.write("ELEMENTS\n")
        for s in partition.subdomains:
            fh.write(f"{s.id} " + " ".join(str(v) for v in s.vertex_ids) + "\n")
        fh.write("BOUNDARIES\n")
        for e in partition.internal_boundaries:
            fh.write(f"I {e.id} {e.v1} {e.v2} {e.left_subdomain} {e.right_subdomain}\n")
        for seg in partition.external_boundaries:
            fh.write(f"E {seg.id} {seg.v1} {seg.v2} {seg.owner_subdomain} {seg.tag}\n")


# ---------------------------------------------------------------------------
# segment queries used to seed cracks
# ---------------------------------------------------------------------------


def edges_on_segment(partition, p0, p1, tol=None):
    """Internal boundaries lying on the segment p0-p1 (colinear, inside)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    seg_len = float(np.hypot(*d))
    if seg_len <= 0:
        raise InvalidInputError("degenerate query segment")
    if tol is None:
        tol = 1e-6 * seg_len
    out = []
    for e in partition.internal_boundaries:
        a = partition.vertices[e.v1] - p0
        b = partition.vertices[e.v2] - p0
        ca = abs(d[0] * a[1] - d[1] * a[0]) / seg_len
        cb = abs(d[0] * b[1] - d[1] * b[0]) / seg_len
        if ca > tol or cb > tol:
            continue
        ta = float(np.dot(a, d)) / seg_len**2
        tb = float(np.dot(b, d)) / seg_len**2
        if min(ta, tb) >= -1e-9 and max(ta, tb) <= 1 + 1e-9:
            out.append(e.id)
    return out


def edge_path_between(partition, p0, p1):
    """Connected internal-boundary path approximating the segment p0-p1.

    Dijkstra over the partition's vertex graph with edge weights that
    strongly favor edges hugging the ideal segment; returns edge ids in
    walk order from the vertex nearest p0 to the vertex nearest p1.
    """
    import heapq

    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    seg_len = float(np.hypot(*d))
    if seg_len <= 0:
        raise InvalidInputError("degenerate query segment")

    verts = partition.vertices
    table = partition.edges_at_vertex()
    ids = sorted(table.keys())
    if not ids:
        return []

    def off_axis(v):
        r = verts[v] - p0
        t = float(np.dot(r, d)) / seg_len**2
        t = min(max(t, 0.0), 1.0)
        return float(np.hypot(*(r - t * d)))

    start = min(ids, key=lambda v: float(np.hypot(*(verts[v] - p0))))
    goal = min(ids, key=lambda v: float(np.hypot(*(verts[v] - p1))))
    if start == goal:
        return []

    penal = 50.0 / max(partition.h, 1e-300)
    dist = {start: 0.0}
    prev = {}
    heap = [(0.0, start)]
    seen = set()
    while heap:
        dcur, v = heapq.heappop(heap)
        if v in seen:
            continue
        seen.add(v)
        if v == goal:
            break
        for eid in table.get(v, ()):
            e = partition.internal_boundaries[eid]
            w = e.v2 if e.v1 == v else e.v1
            mid = 0.5 * (verts[e.v1] + verts[e.v2])
            r = mid - p0
            t = min(max(float(np.dot(r, d)) / seg_len**2, 0.0), 1.0)
            off = float(np.hypot(*(r - t * d)))
            cost = e.length * (1.0 + penal * off)
            nd = dcur + cost
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                prev[w] = (v, eid)
                heapq.heappush(heap, (nd, w))
    if goal not in prev and goal != start:
        raise InvalidInputError("no edge path between the requested endpoints")
    path = []
    v = goal
    while v != start:
        v, eid = prev[v]
        path.append(eid)
    return path[::-1]
