"""Synthesis of the non-minimum-phase resonant damping controller (NRC).

The controller is the first-order all-pass-like section

    C_d(s) = k * (s - w_a) / (s + w_a)

with constant magnitude k at every frequency and phase sweeping from
+/-180 deg at DC through a quarter turn at w_a towards 0 deg. The single
right-half-plane zero at +w_a is what buys the tunable phase at constant
gain. Tuning is parameterized by gamma (fraction of inverse plant DC gain)
and n (corner frequency in units of the dominant resonance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .lti import RationalTF, dc_gain, tf_series
from .plants import PlantSpec, build_plant


@dataclass(frozen=True)
class NrcSpec:
    """Damping-controller tuning record.

    gamma in (0, 1] sets the loop DC gain magnitude (1.0 gives the marginal,
    integrator-like inner loop); n > 0 places the controller corner at
    n times the dominant resonance. taming_l, when present, appends a
    first-order low-pass at l times the resonance for high-frequency
    roll-off.
    """

    gamma: float
    n: float
    taming_l: float | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0,1]")
        if self.n <= 0.0:
            raise ValueError("n must be > 0")
        if self.taming_l is not None and self.taming_l <= 0.0:
            raise ValueError("taming_l must be > 0")


@dataclass(frozen=True)
class StateSpaceRealization:
    """Minimal (scalar) realization of the untamed controller."""

    a: float
    b: float
    c: float
    d: float


def nrc(k: float, omega_a: float) -> RationalTF:
    """The raw controller k*(s - w_a)/(s + w_a) from explicit gains.

    No range check on k: stability studies legitimately probe gains beyond
    the safe tuning rule.
    """
    if omega_a <= 0.0:
        raise ValueError("omega_a must be > 0")
    return RationalTF.from_coeffs([-k * omega_a, k], [omega_a, 1.0])


def nrc_gains(plant: PlantSpec, spec: NrcSpec) -> tuple[float, float]:
    """Derived (k, w_a) for a plant: k = gamma / G(0), w_a = n * w_n."""
    g0 = dc_gain(build_plant(plant))
    if not math.isfinite(g0) or g0 == 0.0:
        raise ValueError("plant DC gain must be finite and nonzero")
    return spec.gamma / g0, spec.n * plant.omega_n


def synthesize_nrc(plant: PlantSpec, spec: NrcSpec) -> RationalTF:
    """Tune the damping controller against a plant.

    The gain inverts the plant DC gain scaled by gamma so that the DC loop
    magnitude is gamma; the corner sits at n times the first resonance.
    With taming_l present the tamed (strictly proper) form is returned.
    """
    k, omega_a = nrc_gains(plant, spec)
    if spec.taming_l is not None:
        return tame_nrc(k, omega_a, spec.taming_l * plant.omega_n)
    return nrc(k, omega_a)


def nrc_state_space(k: float, omega_a: float) -> StateSpaceRealization:
    """Minimal realization: zdot = -w_a z + y, v = -2 w_a k z + k y."""
    if omega_a <= 0.0:
        raise ValueError("omega_a must be > 0")
    return StateSpaceRealization(a=-omega_a, b=1.0, c=-2.0 * omega_a * k, d=k)


def tame_nrc(k: float, omega_a: float, omega_l: float) -> RationalTF:
    """Controller with first-order low-pass roll-off at omega_l.

    The constant-gain section feeds noise straight back into the loop at
    high frequency; the low-pass trades some achievable damping for
    attenuation there.
    """
    if omega_l <= 0.0:
        raise ValueError("omega_l must be > 0")
    lp = RationalTF.from_coeffs([omega_l], [omega_l, 1.0])
    return tf_series(nrc(k, omega_a), lp)


def min_damping_n(zeta_n: float, eta: float = 1.0) -> float:
    """Smallest corner ratio n that fully damps the resonant pole pair.

    For the marginal tuning (gamma = 1) the closed-loop conjugate pair
    coalesces onto the real axis once n >= 2*eta*(sqrt(2) + zeta_n), where
    eta <= 1 is the load-induced resonance scaling. Monotone in both
    arguments, so a controller tuned for the unloaded plant keeps complete
    damping under load.
    """
    if zeta_n < 0.0:
        raise ValueError("zeta_n must be >= 0")
    if not (0.0 < eta <= 1.0):
        raise ValueError("eta must lie in (0, 1]")
    return 2.0 * eta * (math.sqrt(2.0) + zeta_n)
