import numpy as np
import pytest

from copulaloss.copulas import CopulaSpec, tau_to_theta
from copulaloss.joint import JointModel, joint_sample
from copulaloss.margins import GammaParams, ZtpParams
from copulaloss.regression import Dataset
from copulaloss.simharness import ALPHA_TRUE, BETA_TRUE, DESIGN_NAMES, generate_design

# Example portfolio margins used throughout: mean claim 1000, sd 300, lam 2.5.
MU, DELTA, LAM = 1000.0, 0.09, 2.5


def simulate_dataset(n, family, tau, seed, delta=0.25):
    """Draw a dataset from the simulation design with the stated copula."""
    rng = np.random.default_rng(seed)
    design = generate_design(n, rng)
    cop = CopulaSpec.independence() if tau == 0 else tau_to_theta(tau, family)
    mu = np.exp(design @ np.array(ALPHA_TRUE))
    lam = np.exp(design @ np.array(BETA_TRUE))
    x, y = joint_sample(JointModel(GammaParams(mu, delta), ZtpParams(lam), cop), rng)
    return Dataset(x, y, design, design, None, DESIGN_NAMES, DESIGN_NAMES)


@pytest.fixture(scope="session")
def severity():
    return GammaParams(MU, DELTA)


@pytest.fixture(scope="session")
def frequency():
    return ZtpParams(LAM)


_ACCEPTANCE = {}


def record_acceptance(criterion, passed, detail):
    """Store and print the one-line verdict of an acceptance criterion."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE[criterion] = line
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
