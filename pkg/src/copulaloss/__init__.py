"""Copula models for insurance claim frequency and average claim severity."""

__version__ = "0.1.0"

from .copulas import CopulaFamily, CopulaSpec, copula_cdf, h_function, tau_to_theta, theta_to_tau
from .joint import JointModel, joint_density, joint_sample
from .loss import LossDistribution, loss_cdf, loss_mean, loss_pdf, loss_quantile, loss_variance
from .margins import GammaParams, ZtpParams
from .portfolio import TotalLossEstimate, total_loss, total_loss_quantile
from .regression import Dataset, FitResult, fit_ifm, fit_independence, fit_mle, wald_ci
from .selection import VuongResult, aic, vuong_test

__all__ = [
    "CopulaFamily", "CopulaSpec", "copula_cdf", "h_function", "tau_to_theta", "theta_to_tau",
    "JointModel", "joint_density", "joint_sample",
    "LossDistribution", "loss_cdf", "loss_mean", "loss_pdf", "loss_quantile", "loss_variance",
    "GammaParams", "ZtpParams",
    "TotalLossEstimate", "total_loss", "total_loss_quantile",
    "Dataset", "FitResult", "fit_ifm", "fit_independence", "fit_mle", "wald_ci",
    "VuongResult", "aic", "vuong_test",
]
