"""Data-driven Koopman representations of dynamical systems.

Learn finite-dimensional linear or nonlinear representations of maps and
flows from trajectory data: companion and pseudoinverse DMD, finite-section
(EDMD) operator approximations, weighted ergodic averages and partitions,
static regression onto conditional expectations, memory-kernel
decompositions, and sparse model recovery, checked against systems whose
Koopman spectra are known in closed form.
"""

from .dmd import (
    CompanionModel,
    SpectralTriple,
    companion_dmd,
    continuous_time_eigenvalues,
    moore_penrose_pseudoinverse,
    pseudoinverse_dmd,
    spectral_triple,
)
from .embedding import SnapshotPair, delay_embed, hankel_pair
from .errors import (
    DefectiveMatrixError,
    DegenerateDictionaryError,
    DegenerateFitError,
    DivergenceError,
    KoopmanError,
    ObservableDomainError,
    PreconditionError,
    UsageError,
)
from .finite_section import FiniteSectionMatrix, dual_basis, finite_section_matrix
from .mori_zwanzig import (
    FourierObservable,
    MzDecomposition,
    circle_rotation_closure,
    mz_decompose,
)
from .observables import (
    Observable,
    ObservableDictionary,
    fourier_box,
    monomial_library,
)
from .partitions import (
    HarmonicAverage,
    PartitionLabeling,
    RegularGrid,
    TimeAverageField,
    ergodic_partition_approx,
    gla_eigenfunction,
    partition_invariance_score,
    time_average,
)
from .representation_eval import (
    RepresentationModel,
    conjugacy_check,
    efficiency_rank_heuristic,
    faithfulness_estimate,
    representation_residual,
    sindy_fit,
    stability_certificate,
)
from .static_koopman import (
    PairedSamples,
    StaticFit,
    conditional_expectation_projection,
    fiber_indicator_matrix,
    fiber_mean_matrix,
    fit_static_linear,
)
from .systems import (
    SystemSpec,
    Trajectory,
    duffing_fixed_point_eigenvalues,
    hamiltonian,
    integrate,
    known_spectrum,
    spectral_lattice,
    step_map,
    vector_field,
)

__all__ = [
    "KoopmanError",
    "UsageError",
    "DivergenceError",
    "ObservableDomainError",
    "DegenerateDictionaryError",
    "DefectiveMatrixError",
    "DegenerateFitError",
    "PreconditionError",
    "SystemSpec",
    "Trajectory",
    "integrate",
    "step_map",
    "vector_field",
    "hamiltonian",
    "known_spectrum",
    "spectral_lattice",
    "duffing_fixed_point_eigenvalues",
    "Observable",
    "ObservableDictionary",
    "fourier_box",
    "monomial_library",
    "SnapshotPair",
    "delay_embed",
    "hankel_pair",
    "CompanionModel",
    "SpectralTriple",
    "companion_dmd",
    "pseudoinverse_dmd",
    "spectral_triple",
    "continuous_time_eigenvalues",
    "moore_penrose_pseudoinverse",
    "FiniteSectionMatrix",
    "finite_section_matrix",
    "dual_basis",
    "RegularGrid",
    "TimeAverageField",
    "HarmonicAverage",
    "PartitionLabeling",
    "time_average",
    "gla_eigenfunction",
    "ergodic_partition_approx",
    "partition_invariance_score",
    "PairedSamples",
    "StaticFit",
    "fit_static_linear",
    "conditional_expectation_projection",
    "fiber_indicator_matrix",
    "fiber_mean_matrix",
    "MzDecomposition",
    "FourierObservable",
    "mz_decompose",
    "circle_rotation_closure",
    "RepresentationModel",
    "representation_residual",
    "faithfulness_estimate",
    "conjugacy_check",
    "sindy_fit",
    "stability_certificate",
    "efficiency_rank_heuristic",
]

__version__ = "0.1.0"
