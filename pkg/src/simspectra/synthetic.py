"""Ground-truth bundle generators and analytic mesh primitives.

Every generator is a pure function of its spec: randomness comes from the
counter-based Philox PRNG keyed as ``(seed, stream_index)``, with one
stream per simulation, so identical specs reproduce bundles bitwise on any
platform and simulations can be generated in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import SimulationBundle
from .errors import ParseError
from .mesh import TriMesh


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a synthetic bundle: kind, seed, sizes, kind params."""

    kind: str
    seed: int = 0
    m: int = 1
    tau: int = 1
    params: dict = field(default_factory=dict)


def _rng(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed % 2**64, stream % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# mesh primitives


def make_strip(nx: int, ny: int, lx: float = 2.0, ly: float = 1.0) -> TriMesh:
    """Flat rectangular grid in the z=0 plane, nx*ny vertices."""
    xs = np.linspace(0.0, lx, nx)
    ys = np.linspace(0.0, ly, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(nx * ny)])
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            c = (i + 1) * ny + j + 1
            d = i * ny + j + 1
            faces.append((a, b, c))
            faces.append((a, c, d))
    return TriMesh(verts, np.array(faces))


def make_cylinder(
    n_axial: int = 24, n_radial: int = 12, radius: float = 0.5, height: float = 2.0
) -> TriMesh:
    """Open tube: (n_axial + 1) rings of n_radial vertices."""
    ang = 2.0 * np.pi * np.arange(n_radial) / n_radial
    verts = []
    for i in range(n_axial + 1):
        z = height * (i / n_axial - 0.5)
        for a in ang:
            verts.append((radius * np.cos(a), radius * np.sin(a), z))
    faces = []
    for i in range(n_axial):
        for j in range(n_radial):
            jn = (j + 1) % n_radial
            a = i * n_radial + j
            b = i * n_radial + jn
            c = (i + 1) * n_radial + jn
            d = (i + 1) * n_radial + j
            faces.append((a, b, c))
            faces.append((a, c, d))
    return TriMesh(np.array(verts), np.array(faces))


_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _ICO_T, 0), (1, _ICO_T, 0), (-1, -_ICO_T, 0), (1, -_ICO_T, 0),
        (0, -1, _ICO_T), (0, 1, _ICO_T), (0, -1, -_ICO_T), (0, 1, -_ICO_T),
        (_ICO_T, 0, -1), (_ICO_T, 0, 1), (-_ICO_T, 0, -1), (-_ICO_T, 0, 1),
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ],
    dtype=np.int64,
)


def make_icosphere(level: int = 2, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron projected to a sphere; 10*4^level + 2 vertices."""
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = verts[i] + verts[j]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(radius * np.array(verts), np.array(faces))


def make_icosahedron(edge: float = 1.0) -> TriMesh:
    """Regular icosahedron with the given edge length (12 vertices, 20 faces)."""
    scale = edge / np.linalg.norm(_ICO_VERTS[0] - _ICO_VERTS[1])
    return TriMesh(scale * _ICO_VERTS, _ICO_FACES)


# ---------------------------------------------------------------------------
# rigid motions


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (random unit quaternion)."""
    return _quat_to_matrix(rng.standard_normal(4))


# ---------------------------------------------------------------------------
# generators


def gen_cylinder_rigid(spec: GeneratorSpec) -> SimulationBundle:
    """Rigidly moved copies of a cylinder: one frame per simulation.

    Each simulation applies a uniformly random rotation about the shape
    centroid plus a uniform random translation. Params: ``n_axial``,
    ``n_radial``, ``radius``, ``height``, ``rotate`` (bool),
    ``translate`` (half-width of the uniform translation cube).
    """
    p = spec.params
    mesh = make_cylinder(
        p.get("n_axial", 24), p.get("n_radial", 12),
        p.get("radius", 0.5), p.get("height", 2.0),
    )
    rotate = p.get("rotate", True)
    tr_scale = p.get("translate", 0.5)
    center = mesh.vertices.mean(axis=0)
    frames = np.empty((spec.m, 1, mesh.n_vertices, 3))
    for i in range(spec.m):
        rng = _rng(spec.seed, i)
        rot = random_rotation(rng) if rotate else np.eye(3)
        t = rng.uniform(-tr_scale, tr_scale, size=3) if tr_scale > 0 else np.zeros(3)
        frames[i, 0] = (mesh.vertices - center) @ rot.T + center + t
    return SimulationBundle(mesh, frames)


def _bend_strip(verts: np.ndarray, lx: float, angle: float) -> np.ndarray:
    """Isometric developable bend of a flat strip onto a cylinder arc.

    ``angle`` is the total turning over the strip length; 0 returns the
    flat strip. Arc length along x is preserved exactly.
    """
    if abs(angle) < 1e-12:
        return verts.copy()
    r = lx / angle
    x = verts[:, 0]
    out = np.empty_like(verts)
    out[:, 0] = r * np.sin(x / r)
    out[:, 1] = verts[:, 1]
    out[:, 2] = r * (1.0 - np.cos(x / r))
    return out


def gen_isometric_bend(spec: GeneratorSpec) -> SimulationBundle:
    """Developable strip bent along cylinders of per-simulation radius.

    The bend angle of simulation i at step s is
    ``theta_i * (s + 1) / tau``, so the angle grows monotonically in time
    and every frame is an exact isometry of the flat rest strip.

    With ``bifurcation > 0`` the bundle forks halfway through time: each
    simulation carries a random branch sign, and after step tau/2 its bend
    angle additionally grows (+1) or shrinks (-1) by a ramp of amplitude
    ``bifurcation * theta``. A small random rigid rotation per simulation
    (``jitter`` radians) keeps the early-time point cloud isotropic instead
    of degenerate. Branch signs are stored in ``labels["branch"]``.
    """
    p = spec.params
    nx, ny = p.get("nx", 40), p.get("ny", 25)
    lx, ly = p.get("lx", 2.0), p.get("ly", 1.0)
    theta = p.get("theta", 1.5)
    spread = p.get("spread", 0.2)
    bifurcation = p.get("bifurcation", 0.0)
    jitter = p.get("jitter", 0.02 if bifurcation else 0.0)
    mesh = make_strip(nx, ny, lx, ly)
    center = mesh.vertices.mean(axis=0)
    frames = np.empty((spec.m, spec.tau, mesh.n_vertices, 3))
    branches = np.empty(spec.m)
    angles = np.empty(spec.m)
    for i in range(spec.m):
        rng = _rng(spec.seed, i)
        theta_i = theta * (1.0 + spread * rng.standard_normal())
        branch = 1.0 if rng.uniform() < 0.5 else -1.0
        rot = (
            _quat_to_matrix(
                np.concatenate([[1.0 / max(jitter, 1e-12)], rng.standard_normal(3)])
            )
            if jitter > 0
            else np.eye(3)
        )
        angles[i] = theta_i
        branches[i] = branch
        for s in range(spec.tau):
            phase = (s + 1) / spec.tau
            ang = theta_i * phase
            if bifurcation:
                ramp = max(0.0, phase - 0.5) * 2.0
                ang += branch * bifurcation * theta * ramp
            bent = _bend_strip(mesh.vertices, lx, ang)
            frames[i, s] = (bent - center) @ rot.T + center
    labels = {"bend_angle": angles.tolist()}
    if bifurcation:
        labels["branch"] = branches.tolist()
    return SimulationBundle(mesh, frames, labels)


def gen_noisy_isometry(spec: GeneratorSpec, sigma: float | None = None) -> SimulationBundle:
    """Isometric bend bundle plus per-vertex Gaussian positional noise.

    ``sigma`` (also accepted as a spec param) is in units of the mean rest
    edge length; 0 reproduces :func:`gen_isometric_bend` exactly.
    """
    if sigma is None:
        sigma = spec.params.get("sigma", 0.0)
    if sigma < 0:
        raise ParseError("sigma must be >= 0")
    base = gen_isometric_bend(spec)
    if sigma == 0.0:
        return base
    scale = sigma * base.mesh.mean_edge_length()
    frames = base.frames.copy()
    for i in range(spec.m):
        rng = _rng(spec.seed, 2**32 + i)  # independent stream from the bend draws
        frames[i] += scale * rng.standard_normal(frames[i].shape)
    return SimulationBundle(base.mesh, frames, base.labels)


@dataclass(frozen=True)
class LatentRecord:
    """Ground-truth latent values kept aside as the oracle for FP tests."""

    latent: np.ndarray        # (m, tau, n_vertices, d_latent)
    base: np.ndarray          # (n_vertices, d_latent) rest latent coordinates
    marginal_std: np.ndarray  # (tau,) exact OU marginal std per step
    params: dict


_DEFAULT_MIX = np.array(
    [
        [1.2, 0.3, 0.1],
        [-0.2, 0.9, 0.4],
        [0.1, -0.3, 1.1],
    ]
)


def _poly_warp(p: np.ndarray, a: float) -> np.ndarray:
    out = np.empty_like(p)
    out[..., 0] = p[..., 0] + a * p[..., 1] ** 2
    out[..., 1] = p[..., 1] + a * p[..., 0] * p[..., 1]
    out[..., 2] = p[..., 2] + a * (p[..., 0] ** 2 - p[..., 1] ** 2)
    return out


def poly_warp_jacobian(p: np.ndarray, a: float) -> np.ndarray:
    """Analytic Jacobian of the polynomial warp at points (..., 3)."""
    p1, p2 = p[..., 0], p[..., 1]
    j = np.zeros(p.shape[:-1] + (3, 3))
    j[..., 0, 0] = 1.0
    j[..., 0, 1] = 2 * a * p2
    j[..., 1, 0] = a * p2
    j[..., 1, 1] = 1.0 + a * p1
    j[..., 2, 0] = 2 * a * p1
    j[..., 2, 1] = -2 * a * p2
    j[..., 2, 2] = 1.0
    return j


def gen_latent_ito(
    spec: GeneratorSpec,
    d_latent: int = 2,
    phi: str = "linear",
) -> tuple[SimulationBundle, LatentRecord]:
    """Bundle driven by independent per-vertex Ornstein-Uhlenbeck paths.

    Vertex k of the rest grid carries latent coordinates (its first
    ``d_latent`` grid coordinates). Each simulation perturbs them with an
    independent OU path (drift ``-theta * xi``, noise ``b``, Euler-Maruyama
    with ``tau`` steps of size ``dt``) and the perturbed points are pushed
    through the observation map ``phi`` into R^3. The exact latent values
    and the per-step marginal std are returned for oracle tests.

    phi: ``"linear"`` (fixed invertible mix, override with params
    ``{"matrix": ...}``) or ``"polynomial_warp"`` (quadratic warp of
    strength ``warp_strength``).
    """
    if d_latent not in (1, 2, 3):
        raise ParseError("d_latent must be 1, 2, or 3")
    p = spec.params
    nx, ny = p.get("nx", 24), p.get("ny", 13)
    lx, ly = p.get("lx", 2.0), p.get("ly", 1.0)
    theta = p.get("theta", 1.0)
    b = p.get("noise", 0.05)
    dt = p.get("dt", 0.1)
    warp_strength = p.get("warp_strength", 0.15)
    matrix = np.asarray(p.get("matrix", _DEFAULT_MIX), dtype=np.float64)
    mesh = make_strip(nx, ny, lx, ly)
    n = mesh.n_vertices
    base3 = mesh.vertices.copy()

    def observe(points3: np.ndarray) -> np.ndarray:
        if phi == "linear":
            return points3 @ matrix.T
        if phi == "polynomial_warp":
            return _poly_warp(points3, warp_strength)
        raise ParseError(f"unknown phi {phi!r}")

    frames = np.empty((spec.m, spec.tau, n, 3))
    latent = np.empty((spec.m, spec.tau, n, d_latent))
    decay = 1.0 - theta * dt
    for i in range(spec.m):
        rng = _rng(spec.seed, i)
        xi = np.zeros((n, d_latent))
        for s in range(spec.tau):
            xi = decay * xi + b * np.sqrt(dt) * rng.standard_normal((n, d_latent))
            pts = base3.copy()
            pts[:, :d_latent] += xi
            frames[i, s] = observe(pts)
            latent[i, s] = base3[:, :d_latent] + xi
    var = np.empty(spec.tau)
    v = 0.0
    for s in range(spec.tau):
        v = decay**2 * v + b**2 * dt
        var[s] = v
    record = LatentRecord(
        latent=latent,
        base=base3[:, :d_latent].copy(),
        marginal_std=np.sqrt(var),
        params={
            "theta": theta, "noise": b, "dt": dt, "phi": phi,
            "warp_strength": warp_strength, "d_latent": d_latent,
        },
    )
    return SimulationBundle(mesh, frames), record


def generate(spec: GeneratorSpec):
    """Dispatch on ``spec.kind``; latent_ito returns (bundle, record)."""
    if spec.kind == "cylinder_rigid":
        return gen_cylinder_rigid(spec)
    if spec.kind == "isometric_bend":
        return gen_isometric_bend(spec)
    if spec.kind == "noisy_isometry":
        return gen_noisy_isometry(spec)
    if spec.kind == "latent_ito":
        return gen_latent_ito(
            spec,
            d_latent=spec.params.get("d_latent", 2),
            phi=spec.params.get("phi", "linear"),
        )
    raise ParseError(f"unknown generator kind {spec.kind!r}")
