from __future__ import annotations

from enum import IntEnum


class StrategyLabel(IntEnum):
    """Window-level problem-solving strategy.

    The integer value doubles as the class index and fixes the tie-break
    order used whenever two classes are equally likely.
    """

    TRIAL_AND_ERROR = 0
    SEQUENTIAL = 1
    PARALLEL = 2

    @property
    def ml_value(self) -> float:
        return ML_VALUES[self]

    @classmethod
    def parse(cls, text: str) -> "StrategyLabel":
        key = text.strip().upper().replace("-", "_").replace(" ", "_")
        aliases = {"TE": "TRIAL_AND_ERROR", "SEQ": "SEQUENTIAL", "PAR": "PARALLEL",
                   "TRIALANDERROR": "TRIAL_AND_ERROR"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown strategy label {text!r}") from None


ML_VALUES: dict[StrategyLabel, float] = {
    StrategyLabel.TRIAL_AND_ERROR: 0.0,
    StrategyLabel.SEQUENTIAL: 0.5,
    StrategyLabel.PARALLEL: 1.0,
}
N_CLASSES = len(StrategyLabel)


def ml_value(label: StrategyLabel) -> float:
    return ML_VALUES[StrategyLabel(label)]
