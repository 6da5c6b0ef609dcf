"""Bayesian regression estimators with variational and MCMC inference.

Estimators follow the familiar fit / predict / score / save / load
pattern. Fitting runs mean-field variational inference by default or the
No-U-Turn sampler as the MCMC alternative; both consume gradients from the
package's tape-based reverse-mode autodiff.
"""

from .advi import AdviConfig, ElboHistory, VariationalPosterior, fit_advi
from .diagnostics import PosteriorSummary, ess, export_elbo, export_trace, split_rhat, summarize
from .model import ModelGraph, ParamBlock
from .models import GaussianProcessRegressor, LinearRegression, load_model
from .nuts import NutsConfig, Trace, sample
from .rng import stream

__version__ = "0.1.0"

__all__ = [
    "AdviConfig",
    "ElboHistory",
    "GaussianProcessRegressor",
    "LinearRegression",
    "ModelGraph",
    "NutsConfig",
    "ParamBlock",
    "PosteriorSummary",
    "Trace",
    "VariationalPosterior",
    "ess",
    "export_elbo",
    "export_trace",
    "fit_advi",
    "load_model",
    "sample",
    "split_rhat",
    "stream",
    "summarize",
    "__version__",
]
