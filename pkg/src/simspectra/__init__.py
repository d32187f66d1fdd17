"""Spectral analysis of simulation bundles with transformation-invariant operators."""

from .bundle import SimulationBundle, extract_function, load_bundle, save_bundle
from .embeddings import (
    Embedding,
    PcaResult,
    branch_silhouette,
    diffusion_maps,
    mode_morph,
    pca,
    procrustes_align,
    rigid_fit,
    time_trajectory_export,
)
from .errors import (
    BasisMismatch,
    ConnectivityMismatch,
    ConvergenceFailure,
    DisconnectedMesh,
    EpsilonTooSmall,
    FrameSizeMismatch,
    IndexOutOfRange,
    LengthMismatch,
    MissingFrame,
    NonFiniteValue,
    ParseError,
    RadiusTooSmall,
    SimspectraError,
)
from .fp import LocalJacobianField, assemble_fp, estimate_local_jacobians, nica_distance
from .geodesics import LocalDistanceField, epsilon_isometry_defect, graph_distances
from .lb import assemble_lb, lb_convergence_probe
from .mesh import MeshFunction, TriMesh, load_mesh, save_mesh_off
from .operators import FpOperatorPair, SymmetricOperator, load_operator, save_operator
from .spectral import (
    CoefficientSet,
    SpectralBasis,
    decay_report,
    decompose,
    load_basis,
    load_coefficients,
    parseval_distance,
    project,
    project_bundle,
    reconstruct,
    save_basis,
    save_coefficients,
)
from .synthetic import (
    GeneratorSpec,
    LatentRecord,
    gen_cylinder_rigid,
    gen_isometric_bend,
    gen_latent_ito,
    gen_noisy_isometry,
    generate,
    make_cylinder,
    make_icosphere,
    make_strip,
)

__version__ = "0.1.0"
