"""Conforming triangular meshes with newest-vertex-bisection refinement.

Triangles are stored counterclockwise with the newest vertex in the last
slot, so the refinement edge is always the edge between the first two
vertices.  Structured meshes place the right-angle vertex last, which keeps
every descendant right-angled and isosceles (h_T^2 / |T| = 4).
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Patch:
    """Star of a mesh node: the triangles and edges meeting at it."""

    node: int
    tris: list
    edges: list  # edges containing the node
    boundary_edges: list  # edges containing the node that lie on the boundary
    all_boundary_edges: list  # every edge of a patch triangle on the boundary
    is_boundary: bool


class Mesh:
    def __init__(self, nodes: np.ndarray, tris: np.ndarray):
        self.nodes = np.asarray(nodes, dtype=float)
        self.tris = np.asarray(tris, dtype=np.int64)
        if self.tris.ndim != 2 or self.tris.shape[1] != 3:
            raise ValueError("triangles must be (M, 3)")
        self._build_geometry()
        self._build_adjacency()

    # -- construction ------------------------------------------------------

    def _build_geometry(self):
        p = self.nodes[self.tris]  # (M, 3, 2)
        d01 = p[:, 1] - p[:, 0]
        d02 = p[:, 2] - p[:, 0]
        det = d01[:, 0] * d02[:, 1] - d01[:, 1] * d02[:, 0]
        if np.any(det <= 0):
            bad = int(np.argmin(det))
            raise ValueError(f"triangle {bad} has non-positive area {det[bad] / 2}")
        self.areas = 0.5 * det
        self.detB = det
        self.B = np.stack([d01, d02], axis=2)  # columns are edge vectors
        self.Binv = np.empty_like(self.B)
        self.Binv[:, 0, 0] = d02[:, 1] / det
        self.Binv[:, 0, 1] = -d02[:, 0] / det
        self.Binv[:, 1, 0] = -d01[:, 1] / det
        self.Binv[:, 1, 1] = d01[:, 0] / det
        e0 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
        e1 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        e2 = np.linalg.norm(d01, axis=1)
        self.diam = np.maximum(e0, np.maximum(e1, e2))

    def _build_adjacency(self):
        edge_index = {}
        edges = []
        edge_tris = []
        M = self.n_tris
        self.tri_edges = np.empty((M, 3), dtype=np.int64)
        for t in range(M):
            a, b, c = self.tris[t]
            for le, (u, v) in enumerate(((b, c), (c, a), (a, b))):
                key = (u, v) if u < v else (v, u)
                e = edge_index.get(key)
                if e is None:
                    e = len(edges)
                    edge_index[key] = e
                    edges.append(key)
                    edge_tris.append([t, -1])
                else:
                    if edge_tris[e][1] != -1:
                        raise ValueError(f"edge {key} shared by more than two triangles")
                    edge_tris[e][1] = t
                self.tri_edges[t, le] = e
        self.edges = np.array(edges, dtype=np.int64)
        self.edge_tris = np.array(edge_tris, dtype=np.int64)
        self._edge_index = edge_index
        self.edge_boundary = self.edge_tris[:, 1] == -1
        self.node_boundary = np.zeros(self.n_nodes, dtype=bool)
        for u, v in self.edges[self.edge_boundary]:
            self.node_boundary[u] = True
            self.node_boundary[v] = True
        self.edge_len = np.linalg.norm(
            self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]], axis=1
        )
        # node -> incident triangles (CSR layout)
        counts = np.zeros(self.n_nodes, dtype=np.int64)
        for t in range(M):
            counts[self.tris[t]] += 1
        self._node_tri_ptr = np.concatenate([[0], np.cumsum(counts)])
        self._node_tri = np.empty(self._node_tri_ptr[-1], dtype=np.int64)
        cursor = self._node_tri_ptr[:-1].copy()
        for t in range(M):
            for v in self.tris[t]:
                self._node_tri[cursor[v]] = t
                cursor[v] += 1

    # -- basic queries -----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_tris(self) -> int:
        return self.tris.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def node_tris(self, z: int) -> np.ndarray:
        return self._node_tri[self._node_tri_ptr[z] : self._node_tri_ptr[z + 1]]

    def edge_id(self, u: int, v: int) -> int:
        return self._edge_index[(u, v) if u < v else (v, u)]

    def tri_points(self, t: int) -> np.ndarray:
        return self.nodes[self.tris[t]]

    def map_to_physical(self, t: int, ref_pts: np.ndarray) -> np.ndarray:
        return self.nodes[self.tris[t, 0]] + ref_pts @ self.B[t].T

    def map_to_reference(self, t: int, phys_pts: np.ndarray) -> np.ndarray:
        return (phys_pts - self.nodes[self.tris[t, 0]]) @ self.Binv[t].T

    def local_edge_of(self, t: int, e: int) -> int:
        for le in range(3):
            if self.tri_edges[t, le] == e:
                return le
        raise ValueError(f"edge {e} not in triangle {t}")

    def edge_normal(self, e: int, t: int) -> np.ndarray:
        """Outward unit normal of triangle t on edge e."""
        u, v = self.edges[e]
        tangent = self.nodes[v] - self.nodes[u]
        n = np.array([tangent[1], -tangent[0]]) / np.linalg.norm(tangent)
        le = self.local_edge_of(t, e)
        opp = self.nodes[self.tris[t, le]]
        mid = 0.5 * (self.nodes[u] + self.nodes[v])
        if np.dot(n, mid - opp) < 0:
            n = -n
        return n

    def patch_of(self, z: int) -> Patch:
        if z < 0 or z >= self.n_nodes:
            raise ValueError("invalid node index")
        tris = sorted(int(t) for t in self.node_tris(z))
        edges = set()
        all_bnd = set()
        for t in tris:
            for le in range(3):
                e = int(self.tri_edges[t, le])
                u, v = self.edges[e]
                if u == z or v == z:
                    edges.add(e)
                if self.edge_boundary[e]:
                    all_bnd.add(e)
        edges = sorted(edges)
        bnd = [e for e in edges if self.edge_boundary[e]]
        return Patch(
            node=z,
            tris=tris,
            edges=edges,
            boundary_edges=bnd,
            all_boundary_edges=sorted(all_bnd),
            is_boundary=bool(self.node_boundary[z]),
        )


def edge_trace_values(mesh: Mesh, degrees: np.ndarray):
    """Per-edge mesh size h|_E and degree p|_E of the DG trace functions."""
    t0 = mesh.edge_tris[:, 0]
    t1 = mesh.edge_tris[:, 1]
    interior = ~mesh.edge_boundary
    h = mesh.diam[t0].copy()
    p = np.asarray(degrees)[t0].astype(float)
    h[interior] = np.minimum(mesh.diam[t0[interior]], mesh.diam[t1[interior]])
    p[interior] = np.maximum(degrees[t0[interior]], degrees[t1[interior]])
    return h, p


# --------------------------------------------------------------------------
# structured initial meshes
# --------------------------------------------------------------------------


def _grid_cells(x0, y0, x1, y1, target_h, force_even_x=False, force_even_y=False):
    nx = max(1, int(np.ceil((x1 - x0) / target_h - 1e-12)))
    ny = max(1, int(np.ceil((y1 - y0) / target_h - 1e-12)))
    if force_even_x and nx % 2:
        nx += 1
    if force_even_y and ny % 2:
        ny += 1
    return nx, ny


def build_structured_mesh(domain, target_h: float, force_even_y: bool = False) -> Mesh:
    """Right-angled structured mesh of a rectangle or the L-shaped domain.

    `domain` is either a rectangle tuple (x0, y0, x1, y1) or the string
    "lshape" for (-1,1)^2 minus (0,1)x(-1,0).  Each grid cell is split along
    its main diagonal; the right-angle vertex is the newest vertex.
    """
    if target_h <= 0:
        raise ValueError("target_h must be positive")
    force_even_x = False
    if isinstance(domain, str):
        if domain != "lshape":
            raise ValueError(f"unknown domain {domain!r}")
        x0, y0, x1, y1 = -1.0, -1.0, 1.0, 1.0
        skip = lambda cx, cy: cx > 0 and cy < 0
        # grid lines must hit x = 0 and y = 0, or cells would straddle the cut
        force_even_x = force_even_y = True
    else:
        x0, y0, x1, y1 = map(float, domain)
        skip = lambda cx, cy: False
    nx, ny = _grid_cells(x0, y0, x1, y1, target_h, force_even_x, force_even_y)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    node_id = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    nodes = []
    tris = []
    for i in range(nx):
        for j in range(ny):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if skip(cx, cy):
                continue
            corners = []
            for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                if node_id[i + di, j + dj] < 0:
                    node_id[i + di, j + dj] = len(nodes)
                    nodes.append((xs[i + di], ys[j + dj]))
                corners.append(node_id[i + di, j + dj])
            a, b, c, d = corners  # ccw from lower-left
            tris.append((c, a, b))  # right angle at b, newest last
            tris.append((a, c, d))  # right angle at d
    return Mesh(np.array(nodes), np.array(tris))


# --------------------------------------------------------------------------
# refinement
# --------------------------------------------------------------------------


def _sorted_edge(u, v):
    return (u, v) if u < v else (v, u)


def _newest_last(tri, nodes):
    """Rotate so the vertex opposite the longest edge sits last (CCW kept)."""
    pts = [nodes[v] for v in tri]
    lengths = []
    for i in range(3):
        d = np.subtract(pts[(i + 2) % 3], pts[(i + 1) % 3])
        lengths.append(float(d @ d))
    newest = int(np.argmax(lengths))
    order = [(newest + 1) % 3, (newest + 2) % 3, newest]
    return tuple(tri[i] for i in order)


def refine(mesh: Mesh, marked, strategy: str = "nvb"):
    """Subdivide the marked triangles and restore conformity.

    Returns (new_mesh, parent_map) where parent_map maps every subdivided
    parent index to the list of its child indices in the new mesh; unchanged
    triangles map to a single-element list.
    """
    if strategy not in ("nvb", "rgb"):
        raise ValueError("strategy must be 'nvb' or 'rgb'")
    marked = set(int(t) for t in marked)
    for t in marked:
        if t < 0 or t >= mesh.n_tris:
            raise ValueError(f"marked triangle {t} out of range")

    nodes = [tuple(xy) for xy in mesh.nodes]
    midpoint = {}

    def mid(u, v):
        key = _sorted_edge(u, v)
        m = midpoint.get(key)
        if m is None:
            m = len(nodes)
            midpoint[key] = m
            nodes.append(
                (
                    0.5 * (nodes[u][0] + nodes[v][0]),
                    0.5 * (nodes[u][1] + nodes[v][1]),
                )
            )
        return m

    tris = [tuple(t) for t in mesh.tris]
    marked_edges = set()
    red = set()
    if strategy == "rgb":
        red = marked
        for t in marked:
            a, b, c = tris[t]
            marked_edges.update({_sorted_edge(a, b), _sorted_edge(b, c), _sorted_edge(c, a)})
    else:
        for t in marked:
            a, b, c = tris[t]
            marked_edges.add(_sorted_edge(a, b))

    # conformity closure: a triangle with any marked edge refines its own
    # refinement edge; iterate to a fixed point
    changed = True
    while changed:
        changed = False
        for t, (a, b, c) in enumerate(tris):
            if t in red:
                continue
            ref_edge = _sorted_edge(a, b)
            if ref_edge in marked_edges:
                continue
            if (
                _sorted_edge(b, c) in marked_edges
                or _sorted_edge(c, a) in marked_edges
            ):
                marked_edges.add(ref_edge)
                changed = True

    new_tris = []
    parent_map = {}

    def split_nvb(tri, out):
        a, b, c = tri
        if _sorted_edge(a, b) in marked_edges:
            m = mid(a, b)
            split_nvb((c, a, m), out)
            split_nvb((b, c, m), out)
        else:
            out.append(tri)

    np_nodes = None
    for t, tri in enumerate(tris):
        start = len(new_tris)
        if t in red:
            a, b, c = tri
            mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
            for kid in ((a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)):
                new_tris.append(_newest_last(kid, nodes))
        else:
            out = []
            split_nvb(tri, out)
            new_tris.extend(out)
        parent_map[t] = list(range(start, len(new_tris)))

    return Mesh(np.array(nodes), np.array(new_tris)), parent_map


def uniform_refine(mesh: Mesh):
    return refine(mesh, range(mesh.n_tris), "nvb")


# --------------------------------------------------------------------------
# audits
# --------------------------------------------------------------------------


def audit_conformity(mesh: Mesh, pairwise: bool = False, tol: float = 1e-12) -> bool:
    """Check the no-hanging-node property.

    Structural part: every edge has one or two incident triangles (enforced
    at construction) and orientations are positive.  Geometric part: no node
    lies strictly inside any edge.  With pairwise=True additionally runs the
    O(n^2) segment-crossing and point-in-triangle tests (small meshes only).
    """
    from scipy.spatial import cKDTree

    scale = float(np.max(mesh.edge_len))
    tree = cKDTree(mesh.nodes)
    mids = 0.5 * (mesh.nodes[mesh.edges[:, 0]] + mesh.nodes[mesh.edges[:, 1]])
    for e in range(mesh.n_edges):
        u, v = mesh.edges[e]
        half = 0.5 * mesh.edge_len[e]
        for n in tree.query_ball_point(mids[e], half * (1 + 1e-9)):
            if n == u or n == v:
                continue
            pu, pv, pn = mesh.nodes[u], mesh.nodes[v], mesh.nodes[n]
            d = pv - pu
            s = np.dot(pn - pu, d) / np.dot(d, d)
            if tol < s < 1 - tol:
                closest = pu + s * d
                if np.linalg.norm(pn - closest) < tol * scale:
                    return False
    if pairwise:
        if not _audit_pairwise(mesh, tol * scale):
            return False
    return True


def _segments_cross(p1, p2, p3, p4, tol):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return (d1 * d2 < -tol) and (d3 * d4 < -tol)


def _audit_pairwise(mesh: Mesh, tol: float) -> bool:
    E = mesh.n_edges
    for e1 in range(E):
        a1, b1 = mesh.edges[e1]
        for e2 in range(e1 + 1, E):
            a2, b2 = mesh.edges[e2]
            if len({a1, b1, a2, b2}) < 4:
                continue
            if _segments_cross(
                mesh.nodes[a1], mesh.nodes[b1], mesh.nodes[a2], mesh.nodes[b2], tol
            ):
                return False
    # no node strictly inside a triangle
    for t in range(mesh.n_tris):
        ref = mesh.map_to_reference(t, mesh.nodes)
        inside = (
            (ref[:, 0] > 1e-9)
            & (ref[:, 1] > 1e-9)
            & (ref[:, 0] + ref[:, 1] < 1 - 1e-9)
        )
        inside[mesh.tris[t]] = False
        if np.any(inside):
            return False
    return True


def min_angle(mesh: Mesh) -> float:
    p = mesh.nodes[mesh.tris]
    worst = np.inf
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosang = np.einsum("ij,ij->i", a, b) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
        )
        worst = min(worst, float(np.min(np.degrees(np.arccos(np.clip(cosang, -1, 1))))))
    return worst


def shape_regularity(mesh: Mesh) -> float:
    """max over elements of h_T^2 / |T| (= 4 for right isosceles triangles)."""
    return float(np.max(mesh.diam**2 / mesh.areas))


# --------------------------------------------------------------------------
# plain-text serialization (consumed by the plotting frontend)
# --------------------------------------------------------------------------


def serialize_mesh(mesh: Mesh, degrees=None) -> str:
    if degrees is None:
        degrees = np.ones(mesh.n_tris, dtype=int)
    lines = ["helmdg-mesh 1", f"nodes {mesh.n_nodes}"]
    for x, y in mesh.nodes:
        lines.append(f"{x:.17g} {y:.17g}")
    lines.append(f"triangles {mesh.n_tris}")
    for t in range(mesh.n_tris):
        a, b, c = mesh.tris[t]
        lines.append(f"{a} {b} {c} {int(degrees[t])}")
    return "\n".join(lines) + "\n"


def parse_mesh(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split()[0] != "helmdg-mesh":
        raise ValueError("not a helmdg mesh snapshot")
    i = 1
    tag, n = lines[i].split()
    if tag != "nodes":
        raise ValueError(f"line {i + 1}: expected 'nodes'")
    n = int(n)
    nodes = np.array([[float(v) for v in lines[i + 1 + j].split()] for j in range(n)])
    i += 1 + n
    tag, m = lines[i].split()
    if tag != "triangles":
        raise ValueError(f"line {i + 1}: expected 'triangles'")
    m = int(m)
    rows = [[int(v) for v in lines[i + 1 + j].split()] for j in range(m)]
    tris = np.array([r[:3] for r in rows])
    degrees = np.array([r[3] for r in rows])
    return Mesh(nodes, tris), degrees
