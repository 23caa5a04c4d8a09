"""Local structure indication in particle systems.

Robustified Voronoi neighborhoods plus the extracopularity coefficient, a
count of the bits saved by listing a neighborhood's distinct bond angles
instead of its bond pairs.
"""

from .core import (
    DomainError,
    ParticleSystem,
    SeedPolicy,
    median_nearest_neighbor_distance,
    nearest_neighbor_distance,
    pairwise_distance,
)
from .neighborhoods import (
    DegeneracyError,
    NeighborMap,
    PerturbationConfig,
    naive_neighborhood,
    robust_voronoi_neighborhood,
    voronoi_neighborhood,
)
from .coefficient import (
    AnglePartition,
    ExtracopResult,
    analyze,
    bond_angles,
    coefficient,
    discretize_angles,
    max_coefficient,
    polygon_coefficient,
)
from .generators import (
    LATTICE_TYPES,
    LatticeSpec,
    PackingSpec,
    generate_fcc_with_extrinsic_stacking_fault,
    generate_lattice,
    generate_penrose_vertices,
    generate_poisson_disk,
    lattice,
    packing_factor,
)
from .thermal import CapacityError, ThermalSpec, apply_thermal_displacements, rms_fraction_at
from .analysis import (
    AutocorrelationReport,
    MeshReport,
    UndefinedCorrelationError,
    autocorrelation_report,
    classify_meshiness,
    local_mean_field,
    separability,
    spearman,
)
from .xyz import XYZParseError, format_xyz, read_xyz

__version__ = "0.1.0"
