"""Joint similarity learning and clustering in single and multiple kernel spaces."""

__version__ = "0.1.0"

from .baselines import KernelKMeans, KMeansConfig, SpectralClustering, kernel_kmeans, kmeans, spectral_clustering
from .dataio import DataMatrix, load_csv, standardize
from .kernels import KernelBank, build_standard_bank, combine, gaussian_kernel, linear_kernel, polynomial_kernel
from .metrics import MetricReport, accuracy, evaluate, nmi, purity
from .scmk import SCMK, ScmkConfig, fit_scmk, update_weights
from .scsk import SCSK, FitResult, ScskConfig, fit_scsk

__all__ = [
    "SCSK",
    "SCMK",
    "KernelKMeans",
    "SpectralClustering",
    "DataMatrix",
    "KernelBank",
    "KMeansConfig",
    "ScskConfig",
    "ScmkConfig",
    "FitResult",
    "MetricReport",
    "load_csv",
    "standardize",
    "gaussian_kernel",
    "linear_kernel",
    "polynomial_kernel",
    "build_standard_bank",
    "combine",
    "fit_scsk",
    "fit_scmk",
    "update_weights",
    "kmeans",
    "kernel_kmeans",
    "spectral_clustering",
    "accuracy",
    "nmi",
    "purity",
    "evaluate",
]
