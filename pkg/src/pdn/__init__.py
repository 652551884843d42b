"""Probabilistic density network for multivalued acoustic inverse design.

A plane-wave transfer-matrix model labels stepped-duct structures with their
transmission spectra; a mixture density network learns the one-to-many map
from spectrum back to structure; mode finding, sampling, and forward-model
verification turn the learned density into ranked design candidates.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .data import (
    Dataset,
    NormalizationStats,
    export_csv,
    generate_grid_corpus,
    generate_random_corpus,
    load,
    normalize,
    save,
)
from .forward import (
    AIR,
    FrequencyGrid,
    PhysicalMedium,
    StructureGeometry,
    cascade,
    segment_matrix,
    spectrum,
    transmittance,
)
from .inverse import (
    DesignCandidate,
    ModeSearchConfig,
    density,
    design,
    find_modes,
    quality_factor,
    sample,
    write_report,
)
from .network import (
    MixtureParams,
    NetworkConfig,
    NetworkWeights,
    backward,
    forward,
    init_weights,
    nll,
)
from .pca import DensityMap, PcaModel, density_map, fit_pca, lift, project
from .training import TrainConfig, TrainingLog, train

__version__ = "0.1.0"
