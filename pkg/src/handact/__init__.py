"""handact: egocentric hand-action recognition at desk scale.

Discrete curvature fields on deformable triangle meshes, a grasp-type
taxonomy with per-frame labeling, a multi-head frame-embedding network
trained with composite losses, and a bidirectional GRU temporal model,
plus a deterministic synthetic corpus generator that makes the whole
pipeline verifiable end to end.
"""

__version__ = "0.1.0"

from .curvature import (CurvatureField, angle_defects, compute_curvature,
                        gaussian_curvature, mean_curvature, principal_curvatures)
from .mesh import (TriangleMesh, VertexAdjacency, build_adjacency,
                   euler_characteristic, load_mesh, validate_mesh, write_off)
from .taxonomy import (DistributionReport, GraspType, Taxonomy,
                       TransitionAnnotation, expand_transitions, label_statistics,
                       labels_to_transitions, load_taxonomy)

__all__ = [
    "__version__",
    "TriangleMesh", "VertexAdjacency", "build_adjacency", "validate_mesh",
    "load_mesh", "write_off", "euler_characteristic",
    "CurvatureField", "mean_curvature", "gaussian_curvature",
    "principal_curvatures", "angle_defects", "compute_curvature",
    "GraspType", "Taxonomy", "TransitionAnnotation", "DistributionReport",
    "load_taxonomy", "expand_transitions", "labels_to_transitions",
    "label_statistics",
]
