"""decaylab: norms, solvers and decay bounds for quasilinear parabolic problems."""

from decaylab.lorentz import (
    LorentzExponents,
    SampledFunction,
    SobolevConstants,
    dist_to_linf,
    distribution_function,
    lorentz_norm,
    sample_radial_profile,
    sobolev_constant,
    truncate,
    unit_ball_volume,
    weak_norm,
)

__version__ = "0.1.0"
