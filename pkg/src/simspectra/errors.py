"""Exception and warning types shared across the package."""


class SimspectraError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SimspectraError):
    """Malformed mesh file or mesh arrays that violate basic structure."""


class DisconnectedMesh(SimspectraError):
    """Vertex adjacency graph has more than one connected component."""


class FrameSizeMismatch(SimspectraError):
    """A frame file does not contain exactly n_vertices * 3 coordinates."""


class NonFiniteValue(SimspectraError):
    """NaN or Inf encountered where finite data is required."""


class MissingFrame(SimspectraError):
    """A frame file referenced by the manifest does not exist."""


class IndexOutOfRange(SimspectraError):
    """Simulation, step, or vertex index outside the valid range."""


class ConnectivityMismatch(SimspectraError):
    """Two meshes expected to share connectivity do not."""


class RadiusTooSmall(SimspectraError):
    """Kernel truncation radius leaves some vertex without neighbors."""


class EpsilonTooSmall(SimspectraError):
    """Kernel bandwidth so small the weight matrix is numerically reducible."""


class ConvergenceFailure(SimspectraError):
    """Iterative eigensolver failed to reach tolerance within max iterations."""


class LengthMismatch(SimspectraError):
    """Vector length does not match the mesh or basis dimension."""


class BasisMismatch(SimspectraError):
    """Coefficient vectors do not belong to the same spectral basis."""


class NonManifoldWarning(UserWarning):
    """Input mesh has edges shared by more than two faces."""


class DegenerateFaceWarning(UserWarning):
    """Input mesh contains zero-area (sliver) faces."""


class DegenerateCloudWarning(UserWarning):
    """A per-vertex sample cloud has zero variance in every direction."""
