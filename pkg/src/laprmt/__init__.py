"""laprmt: a numerical lab for random Laplacian-type matrices built from
sparse Erdos-Renyi graphs."""

__version__ = "0.1.0"

from .ensemble import (EnsembleSpec, LaplacianSample, ProjectionBasis, projection_basis,  # noqa: E402
                       sample_goe, sample_laplacian_type)
from .freeconv import free_convolution_table, solve_mfc  # noqa: E402
from .report import VerificationReport  # noqa: E402
from .spectra import Spectrum, nontrivial_spectrum, projected_spectrum, resolvent_hat  # noqa: E402

__all__ = [
    "EnsembleSpec", "LaplacianSample", "ProjectionBasis", "Spectrum", "VerificationReport",
    "free_convolution_table", "nontrivial_spectrum", "projected_spectrum", "projection_basis",
    "resolvent_hat", "sample_goe", "sample_laplacian_type", "solve_mfc",
]
