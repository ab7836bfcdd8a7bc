"""Named experiment setups.

``paper`` is the full-size simulation (n = 2048, 5200 frames). ``desk`` is a
scaled-down version that keeps the three-tier eigenvalue structure and a
large condition number but runs in seconds per trial.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .datagen import CoefficientSchedule, SubspaceChangeModel, SupportSchedule
from .tracker import TrackerConfig


@dataclass
class Preset:
    name: str
    model: SubspaceChangeModel
    coeffs: CoefficientSchedule
    support: SupportSchedule
    t_max: int
    tracker: TrackerConfig
    noise_amplitude: float = 1e-3

    def with_delta(self, Delta: int) -> "Preset":
        return replace(self, support=replace(self.support, Delta=Delta))


def paper(Delta: int = 10, s: int = 20) -> Preset:
    t_train, alpha = 200, 100
    model = SubspaceChangeModel(
        n=2048,
        r0=36,
        change_times=[301, 2501],
        c_new=[1, 1],
        deleted=[[8, 17, 35], [7, 16, 34]],
    )
    coeffs = CoefficientSchedule(
        existing=[
            [400.0] * 9 + [30.0] * 9 + [2.0] * 9 + [1.0] * 9,
            [400.0] * 8 + [30.0] * 8 + [2.0] * 8 + [1.0] * 9,
            [400.0] * 7 + [30.0] * 7 + [2.0] * 7 + [1.331] + [1.0] * 9,
        ],
        gamma_new=1.0,
        ratio=1.1,
        ramp_steps=[4, 7],
        ramp_width=alpha,
        gamma_star=400.0,
    )
    tracker = TrackerConfig(
        alpha=alpha,
        alpha_tilde=200,
        K=15,
        t_train=t_train,
        change_times=list(model.change_times),
        c_new=list(model.c_new),
        c_old=[3, 3],
        clusters=[[8, 8, 18], [7, 7, 18]],
    )
    return Preset("paper", model, coeffs, SupportSchedule(s=s, Delta=Delta, t_train=t_train), 5200, tracker)


def desk(Delta: int = 10, s: int = 8) -> Preset:
    t_train, alpha = 100, 60
    model = SubspaceChangeModel(
        n=256,
        r0=10,
        change_times=[201, 1401],
        c_new=[1, 1],
        deleted=[[2, 5, 9], [1, 4, 7]],
    )
    coeffs = CoefficientSchedule(
        existing=[
            [400.0] * 3 + [30.0] * 3 + [2.0] * 2 + [1.0] * 2,
            [400.0] * 2 + [30.0] * 2 + [2.0] * 2 + [1.0],
            [400.0, 30.0, 2.0, 1.0, 1.331],
        ],
        gamma_new=1.0,
        ratio=1.1,
        ramp_steps=[4, 7],
        ramp_width=alpha,
        gamma_star=400.0,
    )
    tracker = TrackerConfig(
        alpha=alpha,
        alpha_tilde=120,
        K=6,
        t_train=t_train,
        change_times=list(model.change_times),
        c_new=list(model.c_new),
        c_old=[3, 3],
        clusters=[[2, 2, 4], [1, 1, 4]],
    )
    return Preset("desk", model, coeffs, SupportSchedule(s=s, Delta=Delta, t_train=t_train), 2600, tracker)


PRESETS = {"paper": paper, "desk": desk}


def get_preset(name: str, **kwargs) -> Preset:
    try:
        return PRESETS[name](**kwargs)
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
