"""Natural and pseudo-arclength continuation through a planted fold."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssns.continuation import ContinuationError, PlantedFold, continue_branch
from ssns.grid import RadialGrid
from ssns.model import ModelOperator, ModelPotential


@pytest.fixture(scope="module")
def H():
    return ModelOperator(ModelPotential(3, 0.0), RadialGrid(31, 8.0, 3), 0, conjugated=True).matrix


def test_exact_branch_solves(H):
    pf = PlantedFold(H, s0=0.7)
    for s in (-0.3, 0.2, 0.69):
        for sign in (1.0, -1.0):
            u = pf.solution(s, sign)
            assert np.linalg.norm(pf.residual(u, s)) < 1e-10


def test_jacobian_matches_differences(H):
    pf = PlantedFold(H, s0=0.7)
    u = pf.solution(0.1)
    d = np.random.default_rng(0).standard_normal(u.size)
    h = 1e-6
    fd = (pf.residual(u + h * d, 0.1) - pf.residual(u - h * d, 0.1)) / (2 * h)
    assert np.linalg.norm(fd - pf.jacobian(u, 0.1) @ d) < 1e-6 * np.linalg.norm(fd)


@settings(max_examples=4)
@given(s0=st.floats(0.3, 1.0))
def test_fold_located_with_both_segments(H, s0):
    pf = PlantedFold(H, s0=s0)
    state = continue_branch(pf, pf.solution(-0.3), -0.3, 1.2, step=0.05)
    assert state.fold is not None
    assert abs(state.fold["sigma"] - s0) <= 1e-4
    assert len(state.segments) == 2 and all(len(seg) > 1 for seg in state.segments)
    assert state.mode == "pseudo_arclength"


def test_segments_lie_on_opposite_branches(H):
    pf = PlantedFold(H, s0=0.7)
    state = continue_branch(pf, pf.solution(-0.3), -0.3, 1.2, step=0.05)
    first, second = state.segments
    assert pf.x(first[0].u) > 0
    assert pf.x(second[-1].u) < 0
    for p in state.branch:
        assert p.sigma <= 0.7 + 1e-8
        assert np.linalg.norm(pf.residual(p.u, p.sigma)) < 1e-8


def test_regular_branch_needs_no_fold(H):
    pf = PlantedFold(H, s0=5.0)
    state = continue_branch(pf, pf.solution(0.0), 0.0, 1.0, step=0.1)
    assert state.fold is None and state.mode == "natural"
    assert state.sigmas[-1] == pytest.approx(1.0)


def test_unconverged_start_rejected(H):
    pf = PlantedFold(H, s0=0.7)
    with pytest.raises(ContinuationError):
        continue_branch(pf, pf.solution(-0.3), 2.0, 3.0)
