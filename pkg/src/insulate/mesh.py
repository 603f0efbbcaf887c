"""Simplicial 2D triangulations with tagged boundary parts.

Meshes are immutable after construction.  Refinement is conforming
newest-vertex bisection and returns a new mesh.  Boundary sides carry one
of the labels 'I' (insulated), 'D' (Dirichlet), 'N' (Neumann); the three
label sets partition the boundary.
"""

import numpy as np

INSULATED = "I"
DIRICHLET = "D"
NEUMANN = "N"
LABELS = (INSULATED, DIRICHLET, NEUMANN)

_DUPLICATE_TOL = 1e-12


class MeshError(ValueError):
    """Raised when mesh input data violates a construction invariant."""


class Triangulation:
    """Conforming triangle mesh with side-based connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float array
    elements : (ne, 3) int array
        Vertex indices, counterclockwise.  Local side j of an element
        connects its local vertices j and (j+1) % 3.
    sides : (ns, 2) int array
        Vertex pairs, lower index first.  Each side carries one fixed
        unit normal (stored in side_normals): it points from the minus
        element to the plus element, outward on the boundary.
    element_sides : (ne, 3) int array
        Global side index of each local side.
    side_elements : (ns, 2) int array
        Minus and plus element of each side; plus is -1 on the boundary.
    boundary_label : (ns,) str array
        'I', 'D' or 'N' for boundary sides, '' for interior sides.
    refinement_edge : (ne,) int array
        Local side index bisected next (newest-vertex bookkeeping).
    generation : int
        Refinement level counter.
    """

    def __init__(self, vertices, elements, element_sides, sides, side_elements,
                 side_normals, boundary_label, refinement_edge, generation=0,
                 boundary_projection=None):
        self.vertices = vertices
        self.elements = elements
        self.element_sides = element_sides
        self.sides = sides
        self.side_elements = side_elements
        self.side_normals = side_normals
        self.boundary_label = boundary_label
        self.refinement_edge = refinement_edge
        self.generation = generation
        self.boundary_projection = boundary_projection
        self._compute_geometry()
        for a in (self.vertices, self.elements, self.element_sides,
                  self.sides, self.side_elements, self.side_normals,
                  self.refinement_edge):
            a.flags.writeable = False

    def _compute_geometry(self):
        V, E, S = self.vertices, self.elements, self.sides
        p0, p1, p2 = V[E[:, 0]], V[E[:, 1]], V[E[:, 2]]
        cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) \
            - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
        self.areas = 0.5 * cross
        self.barycenters = (p0 + p1 + p2) / 3.0
        self.side_lengths = np.linalg.norm(V[S[:, 1]] - V[S[:, 0]], axis=1)
        self.side_midpoints = 0.5 * (V[S[:, 0]] + V[S[:, 1]])
        # orientation sign of each local side: +1 where the stored side
        # normal is outward for the element (element is the minus side)
        sign = np.ones(self.element_sides.shape, dtype=np.int8)
        minus = self.side_elements[:, 0]
        for j in range(3):
            s = self.element_sides[:, j]
            sign[minus[s] != np.arange(len(E)), j] = -1
        self.element_side_signs = sign
        self.n_vertices = len(V)
        self.n_elements = len(E)
        self.n_sides = len(S)
        self.boundary_sides = np.flatnonzero(self.side_elements[:, 1] < 0)
        lab = self.boundary_label
        self.insulated_sides = np.flatnonzero(lab == INSULATED)
        self.dirichlet_sides = np.flatnonzero(lab == DIRICHLET)
        self.neumann_sides = np.flatnonzero(lab == NEUMANN)

    @property
    def domain_area(self):
        return float(self.areas.sum())

    def averaged_mesh_size(self):
        """(|domain| / #vertices)^(1/2)."""
        return float(np.sqrt(self.domain_area / self.n_vertices))

    def boundary_loop_area(self):
        """Shoelace area of the boundary loops (holes count negative)."""
        bs = self.boundary_sides
        a = self.vertices[self.sides[bs, 0]]
        b = self.vertices[self.sides[bs, 1]]
        # traverse each side so the outward normal sits to the right
        tang = b - a
        ccw = tang[:, 1] * self.side_normals[bs, 0] \
            - tang[:, 0] * self.side_normals[bs, 1] > 0.0
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return float(0.5 * np.sum(np.where(ccw, cross, -cross)))

    def min_angle(self):
        """Smallest interior angle over all elements, in radians."""
        V, E = self.vertices, self.elements
        ang = np.full(self.n_elements, np.inf)
        for j in range(3):
            u = V[E[:, (j + 1) % 3]] - V[E[:, j]]
            w = V[E[:, (j + 2) % 3]] - V[E[:, j]]
            c = np.einsum("ij,ij->i", u, w) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            ang = np.minimum(ang, np.arccos(np.clip(c, -1.0, 1.0)))
        return float(ang.min())

    def element_coords(self):
        """Vertex coordinates per element, shape (ne, 3, 2)."""
        return self.vertices[self.elements]

    def side_label_of(self, s):
        return str(self.boundary_label[s])


def build_mesh(vertices, elements, labels, refinement_edges=None,
               generation=0, boundary_projection=None):
    """Assemble a Triangulation from raw arrays and a boundary labeling.

    Parameters
    ----------
    vertices : (nv, 2) array_like
    elements : (ne, 3) array_like of vertex indices, counterclockwise
    labels : mapping {frozenset({v0, v1}) or (v0, v1): 'I'|'D'|'N'}
        One entry per boundary side, in either vertex order.
    refinement_edges : (ne,) int array, optional
        Local refinement edge per element; defaults to the longest edge.

    Raises
    ------
    MeshError
        On duplicate vertices, inverted elements, non-manifold sides,
        unlabeled boundary sides, or labels on interior sides.
    """
    V = np.ascontiguousarray(np.asarray(vertices, dtype=float))
    E = np.ascontiguousarray(np.asarray(elements, dtype=np.int64))
    if V.ndim != 2 or V.shape[1] != 2:
        raise MeshError("vertices must have shape (nv, 2)")
    if E.ndim != 2 or E.shape[1] != 3:
        raise MeshError("elements must have shape (ne, 3)")
    if E.min(initial=0) < 0 or E.max(initial=-1) >= len(V):
        raise MeshError("element indices out of range")

    order = np.lexsort((V[:, 1], V[:, 0]))
    dv = np.diff(V[order], axis=0)
    dup = np.flatnonzero(np.linalg.norm(dv, axis=1) < _DUPLICATE_TOL)
    if dup.size:
        i, j = order[dup[0]], order[dup[0] + 1]
        raise MeshError(f"duplicate vertices {i} and {j}")

    p0, p1, p2 = V[E[:, 0]], V[E[:, 1]], V[E[:, 2]]
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) \
        - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    if np.any(cross <= 0.0):
        raise MeshError(
            f"inverted or degenerate element {int(np.argmin(cross))}")

    # canonical sides: sort each local edge, unique rows
    ne = len(E)
    raw = np.empty((3 * ne, 2), dtype=np.int64)
    for j in range(3):
        raw[j * ne:(j + 1) * ne, 0] = E[:, j]
        raw[j * ne:(j + 1) * ne, 1] = E[:, (j + 1) % 3]
    raw_sorted = np.sort(raw, axis=1)
    sides, inverse, counts = np.unique(
        raw_sorted, axis=0, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise MeshError(
            f"non-manifold side {sides[np.argmax(counts)].tolist()}")
    element_sides = np.ascontiguousarray(
        inverse.reshape(3, ne).T)

    # minus/plus adjacency relative to the canonical tangent normal; on
    # the boundary the normal is flipped outward if necessary
    ns = len(sides)
    tang = V[sides[:, 1]] - V[sides[:, 0]]
    lengths = np.linalg.norm(tang, axis=1)
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
    side_elements = np.full((ns, 2), -1, dtype=np.int64)
    bary = (p0 + p1 + p2) / 3.0
    for j in range(3):
        s = element_sides[:, j]
        mids = 0.5 * (V[sides[s, 0]] + V[sides[s, 1]])
        outward = np.einsum("ij,ij->i", normals[s], bary - mids) < 0.0
        col = np.where(outward, 0, 1)
        if np.any(side_elements[s, col] >= 0):
            raise MeshError("inconsistent side orientation")
        side_elements[s, col] = np.arange(ne)

    inward_boundary = (side_elements[:, 0] < 0) & (side_elements[:, 1] >= 0)
    normals[inward_boundary] *= -1.0
    side_elements[inward_boundary, 0] = side_elements[inward_boundary, 1]
    side_elements[inward_boundary, 1] = -1
    boundary = side_elements[:, 1] < 0

    label_map = {}
    for key, lab in labels.items():
        pair = tuple(sorted(key))
        if lab not in LABELS:
            raise MeshError(f"unknown boundary label {lab!r}")
        label_map[pair] = lab
    boundary_label = np.full(ns, "", dtype="<U1")
    for s in np.flatnonzero(boundary):
        pair = (int(sides[s, 0]), int(sides[s, 1]))
        try:
            boundary_label[s] = label_map.pop(pair)
        except KeyError:
            raise MeshError(f"unlabeled boundary side {pair}") from None
    if label_map:
        pair = next(iter(label_map))
        raise MeshError(f"label given for non-boundary side {pair}")

    if refinement_edges is None:
        edge_len = np.empty((ne, 3))
        for j in range(3):
            edge_len[:, j] = np.linalg.norm(
                V[E[:, (j + 1) % 3]] - V[E[:, j]], axis=1)
        refinement_edges = np.argmax(edge_len, axis=1).astype(np.int64)
    else:
        refinement_edges = np.ascontiguousarray(
            np.asarray(refinement_edges, dtype=np.int64))

    return Triangulation(V, E, element_sides, sides, side_elements, normals,
                         boundary_label, refinement_edges, generation,
                         boundary_projection)


def refine_nvb(mesh, marked):
    """Newest-vertex bisection of the marked elements with conforming closure.

    Every marked element is bisected at least once.  Boundary labels are
    inherited by child boundary sides and new boundary vertices are moved
    by the mesh's boundary projection when one is attached.
    """
    marked = np.asarray(sorted(set(int(i) for i in marked)), dtype=np.int64)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_elements):
        raise MeshError("marked element index out of range")
    if marked.size == 0:
        return mesh

    E = mesh.elements
    ES = mesh.element_sides
    ref_side = ES[np.arange(mesh.n_elements), mesh.refinement_edge]

    marked_side = np.zeros(mesh.n_sides, dtype=bool)
    marked_side[ref_side[marked]] = True
    # closure: an element with any marked side must have its refinement
    # edge marked as well; iterate to a fixed point
    while True:
        has_marked = marked_side[ES].any(axis=1)
        need = has_marked & ~marked_side[ref_side]
        if not need.any():
            break
        marked_side[ref_side[need]] = True

    # new vertices at midpoints of marked sides (projected on the boundary)
    split = np.flatnonzero(marked_side)
    mid_index = np.full(mesh.n_sides, -1, dtype=np.int64)
    mid_index[split] = mesh.n_vertices + np.arange(split.size)
    a = mesh.vertices[mesh.sides[split, 0]]
    b = mesh.vertices[mesh.sides[split, 1]]
    mids = 0.5 * (a + b)
    if mesh.boundary_projection is not None:
        on_boundary = mesh.side_elements[split, 1] < 0
        for k in np.flatnonzero(on_boundary):
            mids[k] = mesh.boundary_projection(a[k], b[k], mids[k])
    new_vertices = np.vstack([mesh.vertices, mids])

    def bisect(tri, re, midpoints):
        """Split (v0, v1, v2) with refinement edge re; children keep the
        newest-vertex rule: each child's refinement edge is its inherited
        old edge."""
        w0, w1, w2 = tri[re], tri[(re + 1) % 3], tri[(re + 2) % 3]
        m = midpoints[(min(w0, w1), max(w0, w1))]
        return ((w0, m, w2), 2), ((m, w1, w2), 1)

    midpoints = {}
    for k, s in enumerate(split):
        v0, v1 = mesh.sides[s]
        midpoints[(int(v0), int(v1))] = int(mid_index[s])

    new_elements = []
    new_refedges = []
    for t in range(mesh.n_elements):
        sides_t = ES[t]
        if not marked_side[sides_t].any():
            new_elements.append(tuple(int(v) for v in E[t]))
            new_refedges.append(int(mesh.refinement_edge[t]))
            continue
        tri = tuple(int(v) for v in E[t])
        children = bisect(tri, int(mesh.refinement_edge[t]), midpoints)
        for child, re in children:
            # the child's refinement edge is an old edge of the parent;
            # bisect once more if that edge was marked too
            e0, e1 = child[re], child[(re + 1) % 3]
            if (min(e0, e1), max(e0, e1)) in midpoints:
                for gchild, gre in bisect(child, re, midpoints):
                    new_elements.append(gchild)
                    new_refedges.append(gre)
            else:
                new_elements.append(child)
                new_refedges.append(re)

    labels = {}
    for s in mesh.boundary_sides:
        v0, v1 = (int(v) for v in mesh.sides[s])
        lab = str(mesh.boundary_label[s])
        if marked_side[s]:
            m = midpoints[(min(v0, v1), max(v0, v1))]
            labels[(v0, m)] = lab
            labels[(m, v1)] = lab
        else:
            labels[(v0, v1)] = lab

    return build_mesh(new_vertices, np.array(new_elements, dtype=np.int64),
                      labels,
                      refinement_edges=np.array(new_refedges, dtype=np.int64),
                      generation=mesh.generation + 1,
                      boundary_projection=mesh.boundary_projection)


def uniform_refine(mesh):
    """Two full bisection sweeps: every element splits into four children."""
    once = refine_nvb(mesh, np.arange(mesh.n_elements))
    return refine_nvb(once, np.arange(once.n_elements))


def generate_lshape(level=0, setup=1):
    """L-shaped domain (-1,1)^2 minus the quadrant [0,1] x [-1,0].

    The coarse mesh has the 8 lattice vertices and 6 triangles, one
    diagonal per unit square, and 8 boundary sides.  Setup 1 labels the
    whole boundary insulated; setup 2 labels [0,1] x {0} Dirichlet and
    {0} x [-1,0] Neumann.
    """
    verts = np.array([
        [-1.0, -1.0], [0.0, -1.0],
        [-1.0, 0.0], [0.0, 0.0], [1.0, 0.0],
        [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0],
    ])
    elems = np.array([
        [0, 1, 3], [0, 3, 2],      # lower-left square
        [2, 3, 6], [2, 6, 5],      # upper-left square
        [3, 4, 7], [3, 7, 6],      # upper-right square
    ])
    segs = [(0, 1), (1, 3), (3, 4), (4, 7), (7, 6), (6, 5), (5, 2), (2, 0)]
    labels = {}
    for v0, v1 in segs:
        lab = INSULATED
        if setup == 2:
            if (v0, v1) == (3, 4):
                lab = DIRICHLET
            elif (v0, v1) == (1, 3):
                lab = NEUMANN
        labels[(v0, v1)] = lab
    mesh = build_mesh(verts, elems, labels)
    for _ in range(level):
        mesh = uniform_refine(mesh)
    return mesh


def _annulus_projection(inner=0.5, outer=1.0):
    def project(a, b, mid):
        r = 0.5 * (np.linalg.norm(a) + np.linalg.norm(b))
        target = inner if abs(r - inner) < abs(r - outer) else outer
        return mid * (target / np.linalg.norm(mid))
    return project


def generate_annulus(level=0, segments=16):
    """Annulus B_1(0) minus B_1/2(0), polygonal, all boundary insulated.

    The coarse mesh places ``segments`` vertices on each of the radii
    0.5, 0.75 and 1.0; refinement projects new boundary vertices back
    onto the two circles, so the polygon vertices stay on them.
    """
    radii = [0.5, 0.75, 1.0]
    n = segments
    theta = 2.0 * np.pi * np.arange(n) / n
    rings = [np.column_stack([r * np.cos(theta), r * np.sin(theta)])
             for r in radii]
    verts = np.vstack(rings)
    elems = []
    for k in range(len(radii) - 1):
        lo = k * n
        hi = (k + 1) * n
        for i in range(n):
            j = (i + 1) % n
            elems.append([lo + i, hi + j, lo + j])
            elems.append([lo + i, hi + i, hi + j])
    labels = {}
    for i in range(n):
        j = (i + 1) % n
        labels[(i, j)] = INSULATED                      # inner circle
        labels[(2 * n + i, 2 * n + j)] = INSULATED      # outer circle
    mesh = build_mesh(verts, np.array(elems), labels,
                      boundary_projection=_annulus_projection())
    for _ in range(level):
        mesh = uniform_refine(mesh)
    return mesh


def write_mesh(mesh, path):
    """Write the plain-text mesh format (inverse of read_mesh)."""
    lines = ["insulate-mesh v1 d=2", str(mesh.n_vertices)]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    lines.append(str(mesh.n_elements))
    for a, b, c in mesh.elements:
        lines.append(f"{int(a)} {int(b)} {int(c)}")
    bs = mesh.boundary_sides
    lines.append(str(len(bs)))
    for s in bs:
        v0, v1 = mesh.sides[s]
        lines.append(f"{v0} {v1} {mesh.boundary_label[s]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read the plain-text mesh format written by write_mesh."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    it = iter(t for t in tokens if t.strip())
    header = next(it)
    if header.strip() != "insulate-mesh v1 d=2":
        raise MeshError(f"unsupported mesh header {header!r}")
    nv = int(next(it))
    verts = np.array([[float(w) for w in next(it).split()]
                      for _ in range(nv)])
    ne = int(next(it))
    elems = np.array([[int(w) for w in next(it).split()]
                      for _ in range(ne)])
    nb = int(next(it))
    labels = {}
    for _ in range(nb):
        v0, v1, lab = next(it).split()
        labels[(int(v0), int(v1))] = lab
    return build_mesh(verts, elems, labels)
