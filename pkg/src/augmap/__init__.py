"""Sign-based analysis of planar maps through next-iterate root curves."""

from .models import (
    CompetitionParams,
    Family,
    MutualismParams,
    NonFiniteError,
    PlanarMap,
    Point,
    PredPreyParams,
    RickerParams,
    build,
    generic,
    mutualism,
    orbit,
    predprey,
    preset,
    ricker,
    step,
)

__version__ = "0.1.0"
