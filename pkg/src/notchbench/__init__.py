"""Credit-rating classifiers evaluated by notch distance."""

from .rating_scale import (
    SP_LABELS,
    Rating,
    RatingScale,
    default_sp_scale,
    make_scale,
    notch_between,
    parse_rating,
)

__version__ = "0.1.0"

__all__ = ["SP_LABELS", "Rating", "RatingScale", "default_sp_scale", "make_scale", "notch_between", "parse_rating"]
