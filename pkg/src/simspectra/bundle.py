"""Simulation bundles: m simulations over tau time steps sharing one mesh.

On-disk format: a manifest JSON next to one raw binary file per
(simulation, step), each holding the n_vertices x 3 positions as
little-endian float64, row-major. This keeps frames bit-exact across
platforms and lets any stage of the pipeline be re-run from files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FrameSizeMismatch,
    IndexOutOfRange,
    MissingFrame,
    NonFiniteValue,
    ParseError,
)
from .mesh import MeshFunction, TriMesh, load_mesh, save_mesh_off

FRAME_DTYPE = "<f8"
DEFAULT_FRAME_PATTERN = "frames/sim{sim}_step{step}.f64"

CHANNELS = ("x", "y", "z")


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SimulationBundle:
    """Frames of per-vertex positions on a shared mesh connectivity.

    ``frames`` is indexed ``(sim, step, vertex, coord)``. ``labels`` maps a
    design-parameter name to one scalar per simulation.
    """

    mesh: TriMesh
    frames: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        fr = np.ascontiguousarray(np.asarray(self.frames, dtype=np.float64))
        if fr.ndim != 4 or fr.shape[3] != 3:
            raise FrameSizeMismatch(
                f"frames must be (m, tau, n, 3), got {fr.shape}"
            )
        if fr.shape[2] != self.mesh.n_vertices:
            raise FrameSizeMismatch(
                f"frame vertex count {fr.shape[2]} != mesh vertex count "
                f"{self.mesh.n_vertices}"
            )
        if not np.isfinite(fr).all():
            raise NonFiniteValue("bundle frames contain NaN/Inf")
        for name, vals in self.labels.items():
            if len(vals) != fr.shape[0]:
                raise ParseError(
                    f"label {name!r} has {len(vals)} values for "
                    f"{fr.shape[0]} simulations"
                )
        object.__setattr__(self, "frames", _lock(fr))

    @property
    def n_sims(self) -> int:
        return self.frames.shape[0]

    @property
    def n_steps(self) -> int:
        return self.frames.shape[1]

    def frame(self, sim: int, step: int) -> np.ndarray:
        self._check(sim, step)
        return self.frames[sim, step]

    def _check(self, sim: int, step: int) -> None:
        if not (0 <= sim < self.n_sims):
            raise IndexOutOfRange(f"sim {sim} not in [0, {self.n_sims})")
        if not (0 <= step < self.n_steps):
            raise IndexOutOfRange(f"step {step} not in [0, {self.n_steps})")


def extract_function(bundle: SimulationBundle, sim: int, step: int, channel) -> MeshFunction:
    """Extract one mesh function from a bundle.

    ``channel`` is ``"x"``, ``"y"``, ``"z"``, or a tuple
    ``("displacement_norm_diff", step_a, step_b)``, in which case the value
    at vertex k is the square root of the Euclidean norm of the movement of
    that vertex between the two steps (``step`` is ignored).
    """
    if isinstance(channel, tuple):
        kind, step_a, step_b = channel
        if kind != "displacement_norm_diff":
            raise IndexOutOfRange(f"unknown channel {kind!r}")
        u = bundle.frame(sim, step_a)
        v = bundle.frame(sim, step_b)
        vals = np.sqrt(np.linalg.norm(u - v, axis=1))
        return MeshFunction(vals, f"dnd_{step_a}_{step_b}")
    if channel not in CHANNELS:
        raise IndexOutOfRange(f"unknown channel {channel!r}")
    fr = bundle.frame(sim, step)
    return MeshFunction(fr[:, CHANNELS.index(channel)].copy(), channel)


def save_bundle(bundle: SimulationBundle, out_dir, frame_pattern: str = DEFAULT_FRAME_PATTERN) -> Path:
    """Write mesh, manifest, and frame files; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_mesh_off(bundle.mesh, out / "mesh.off")
    for sim in range(bundle.n_sims):
        for step in range(bundle.n_steps):
            p = out / frame_pattern.format(sim=sim, step=step)
            p.parent.mkdir(parents=True, exist_ok=True)
            bundle.frames[sim, step].astype(FRAME_DTYPE).tofile(p)
    manifest = {
        "mesh": "mesh.off",
        "n_vertices": bundle.mesh.n_vertices,
        "n_faces": bundle.mesh.n_faces,
        "n_simulations": bundle.n_sims,
        "n_timesteps": bundle.n_steps,
        "frame_pattern": frame_pattern,
    }
    if bundle.labels:
        manifest["labels"] = {k: list(map(float, v)) for k, v in bundle.labels.items()}
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    return mpath


def load_bundle(manifest_path) -> SimulationBundle:
    """Load and fully validate a bundle from its manifest."""
    mpath = Path(manifest_path)
    if mpath.is_dir():
        mpath = mpath / "manifest.json"
    try:
        manifest = json.loads(mpath.read_text())
    except OSError as exc:
        raise MissingFrame(f"cannot read manifest {mpath}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad manifest JSON: {exc}") from exc
    base = mpath.parent
    for key in ("mesh", "n_simulations", "n_timesteps", "frame_pattern"):
        if key not in manifest:
            raise ParseError(f"manifest missing field {key!r}")
    mesh = load_mesh(base / manifest["mesh"])
    if "n_vertices" in manifest and manifest["n_vertices"] != mesh.n_vertices:
        raise ParseError(
            f"manifest n_vertices {manifest['n_vertices']} != mesh "
            f"{mesh.n_vertices}"
        )
    m = int(manifest["n_simulations"])
    tau = int(manifest["n_timesteps"])
    n = mesh.n_vertices
    frames = np.empty((m, tau, n, 3))
    for sim in range(m):
        for step in range(tau):
            p = base / manifest["frame_pattern"].format(sim=sim, step=step)
            if not p.is_file():
                raise MissingFrame(f"frame file not found: {p}")
            raw = np.fromfile(p, dtype=FRAME_DTYPE)
            if raw.size != n * 3:
                raise FrameSizeMismatch(
                    f"{p}: expected {n * 3} values, found {raw.size}"
                )
            frames[sim, step] = raw.reshape(n, 3)
    labels = {k: list(v) for k, v in manifest.get("labels", {}).items()}
    return SimulationBundle(mesh, frames, labels)
