import pytest

from spiderlab import BranchSpace, PenaltyParams


@pytest.fixture
def half_half():
    return BranchSpace.from_weights({"a": 0.5, "b": 0.5})


@pytest.fixture
def three_branch():
    return BranchSpace.from_weights({"a": 0.5, "b": 0.3, "c": 0.2})


# one representative parameter set per regime, on the half/half space
REGIME_SETS = {
    "dominant-gamma": PenaltyParams({"a": 0.0, "b": 0.0}, 1.0),
    "dominant-alpha": PenaltyParams({"a": 1.0, "b": 0.0}, 0.0),
    "neutral": PenaltyParams({"a": -1.0, "b": -2.0}, 0.0),
    "neg-gamma-flat-max": PenaltyParams({"a": 0.0, "b": -1.0}, -1.0),
    "neg-gamma-all-neg": PenaltyParams({"a": -1.0, "b": -2.0}, -1.0),
}


@pytest.fixture
def regime_sets():
    return dict(REGIME_SETS)
