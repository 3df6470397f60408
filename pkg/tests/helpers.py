"""Small scenario builders shared by the tests."""

import numpy as np

from dipps.domain import EssParams, MicrogridParams, PowerProfile, ProfileKind, SellWindowMask, TariffSchedule, TimeGrid, validate_scenario


def flat_scenario(steps=24, load=0.0, pv=0.0, buy=0.2, sell=0.1, capacity=10.0, grid_limit=5.0, mask=None, bonus=0.0):
    def series(v):
        return tuple(np.broadcast_to(np.asarray(v, dtype=float), (steps,)).tolist())

    return validate_scenario(
        MicrogridParams(EssParams.paper_defaults(capacity), max(series(pv)), grid_limit),
        TimeGrid(0, steps, 1.0),
        PowerProfile(series(load)),
        PowerProfile(series(pv), ProfileKind.PV),
        TariffSchedule(series(buy), series(sell)),
        SellWindowMask(tuple(mask) if mask is not None else (0,) * steps, bonus),
    )
