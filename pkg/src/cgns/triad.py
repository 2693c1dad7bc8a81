"""Physics-constrained stochastic triad model.

One slow observed mode u1 driven by two fast hidden modes (u2, u3) that act
as stochastic anti-damping, with energy-conserving quadratic interactions,
a stabilizing cubic term, and correlated additive/multiplicative (CAM) noise
coupling the observed and hidden noise sources:

    du1 = (gamma1*u1 + I12*u1*u2 + I13*u1*u3 - c*u1^3
           + L12*u2 + L13*u3 + F1) dt
          + sigma1 dW_u1 + (sigma2/gamma2)(L12 - I12*u1) dW_u2
          + (sigma3/gamma3)(L13 - I13*u1) dW_u3
    du2 = (-gamma2/eps*u2 - L12*u1 + L23*u3 - I12*u1^2 + F2) dt
          + sigma2/sqrt(eps) dW_u2
    du3 = (-gamma3/eps*u3 - L13*u1 - L23*u2 - I13*u1^2 + F3) dt
          + sigma3/sqrt(eps) dW_u3

with c = I12^2/gamma2 + I13^2/gamma3. Observed dimension k=1, hidden l=2,
noise sources d=1 (W_u1) and r=2 (W_u2, W_u3).

Long runs with the default parameters produce intermittent bursts in u1 and a
positively skewed, fat-tailed u1 distribution.

Initial conditions are not part of the parameter set; the documented default
for case-study runs is u1 = u2 = u3 = 0 with filter initialization mean 0 and
covariance 0.01*I. Relaxation is fast, so post-burn-in results are
insensitive to this choice; everything is overridable.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import InvalidParams
from .model import CgnsModel, CoefficientSnapshot

#: Default time grid of the case study.
DEFAULT_T_END = 60.0
DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class TriadParams:
    gamma1: float = 1.0
    gamma2: float = 1.2
    gamma3: float = 0.5
    I12: float = 0.5
    I13: float = 0.5
    L12: float = 0.5
    L13: float = 0.5
    L23: float = 2.0
    F1: float = 3.0
    F2: float = 0.0
    F3: float = 0.0
    sigma1: float = 0.5
    sigma2: float = 1.2
    sigma3: float = 0.8
    epsilon: float = 1.0

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def validate(self):
        bad = []
        for name in ("gamma2", "gamma3", "sigma1", "sigma2", "sigma3"):
            if getattr(self, name) <= 0:
                bad.append(f"{name} must be > 0, got {getattr(self, name)}")
        if not (0.0 < self.epsilon <= 1.0):
            bad.append(f"epsilon must be in (0, 1], got {self.epsilon}")
        if bad:
            raise InvalidParams(bad)

    @property
    def c(self) -> float:
        """Cubic damping coefficient implied by energy conservation."""
        return self.I12 ** 2 / self.gamma2 + self.I13 ** 2 / self.gamma3


def default_params() -> TriadParams:
    """The reference case-study parameter set."""
    return TriadParams()


def triad_model(params: TriadParams = None) -> CgnsModel:
    """Build the triad system as a :class:`CgnsModel` (k=1, l=2, d=1, r=2)."""
    p = params if params is not None else default_params()
    p.validate()
    c = p.c
    eps = p.epsilon
    lam_y = np.array([[-p.gamma2 / eps, p.L23],
                      [-p.L23, -p.gamma3 / eps]])
    s1x = np.array([[p.sigma1]])
    s1y = np.zeros((2, 1))
    s2y = np.array([[p.sigma2 / np.sqrt(eps), 0.0],
                    [0.0, p.sigma3 / np.sqrt(eps)]])

    def coeffs(t, x):
        u1 = x[0]
        lam_x = np.array([[p.I12 * u1 + p.L12, p.I13 * u1 + p.L13]])
        f_x = np.array([p.gamma1 * u1 - c * u1 ** 3 + p.F1])
        f_y = np.array([-p.L12 * u1 - p.I12 * u1 ** 2 + p.F2,
                        -p.L13 * u1 - p.I13 * u1 ** 2 + p.F3])
        s2x = np.array([[p.sigma2 / p.gamma2 * (p.L12 - p.I12 * u1),
                         p.sigma3 / p.gamma3 * (p.L13 - p.I13 * u1)]])
        return CoefficientSnapshot(
            lambda_x=lam_x, lambda_y=lam_y, f_x=f_x, f_y=f_y,
            sigma1_x=s1x, sigma2_x=s2x, sigma1_y=s1y, sigma2_y=s2y,
        )

    return CgnsModel(k=1, l=2, d=1, r=2, coeffs=coeffs, name="triad")
