"""Numeric helpers shared by the test modules."""

from collections.abc import Callable

import numpy as np
import pandas as pd

from chargecast.data.windows import ForecastWindow, weekday_onehot
from chargecast.nn import ParamTensor


def central_difference(
    loss: Callable[[], float], param: ParamTensor, index: tuple[int, ...], h: float = 1e-5
) -> float:
    """d loss / d param[index] by central differences."""
    original = param.data[index]
    param.data[index] = original + h
    upper = loss()
    param.data[index] = original - h
    lower = loss()
    param.data[index] = original
    return (upper - lower) / (2 * h)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def make_window(
    rng: np.random.Generator,
    horizon: int,
    history: int,
    day: str = "2024-03-04",
    normalized: bool = True,
    ev_count: float | None = None,
) -> ForecastWindow:
    return ForecastWindow(
        anchor=pd.Timestamp(day),
        history=rng.standard_normal(history),
        target=rng.standard_normal(horizon),
        temperature=rng.standard_normal(horizon),
        humidity=rng.standard_normal(horizon),
        weekday=weekday_onehot(pd.Timestamp(day)),
        ev_count=float(rng.standard_normal()) if ev_count is None else ev_count,
        normalized=normalized,
    )


def grad_close(analytic: float, numeric: float, rtol: float = 1e-4, atol: float = 1e-9) -> bool:
    return abs(analytic - numeric) <= rtol * max(abs(analytic), abs(numeric)) + atol
