import numpy as np
import pytest

from irsloc import Position3, SceneGeometry, UpaConfig


@pytest.fixture
def single_scene() -> SceneGeometry:
    """Flagship single-target geometry: BS [0,0,5], surface [-20,0,3], target [-20,2,0]."""
    return SceneGeometry(
        bs=Position3(0.0, 0.0, 5.0),
        irs=[Position3(-20.0, 0.0, 3.0)],
        targets=[Position3(-20.0, 2.0, 0.0)],
        bs_upa=UpaConfig(20, 20),
        irs_upa=[UpaConfig(30, 30)],
    )


@pytest.fixture
def multi_scene() -> SceneGeometry:
    """Three-target, three-surface geometry."""
    return SceneGeometry(
        bs=Position3(0.0, 0.0, 5.0),
        irs=[Position3(-20.0, 0.0, 3.0), Position3(-10.0, 0.0, 3.0), Position3(-5.0, 0.0, 3.0)],
        targets=[Position3(-10.0, 10.0, 0.0), Position3(-20.0, 2.0, 0.0), Position3(-5.0, 10.0, 0.0)],
        bs_upa=UpaConfig(20, 20),
        irs_upa=[UpaConfig(30, 30)] * 3,
    )


def random_desk_scene(seed: int, max_side: int = 8) -> SceneGeometry:
    """Small randomized scene with UPA sides in [2, max_side], non-degenerate geometry."""
    r = np.random.default_rng(seed)
    bs = Position3(0.0, 0.0, 5.0)
    irs = Position3(float(-15 + r.uniform(-4, 4)), float(r.uniform(-3, 3)), 3.0)
    tgt = Position3(float(r.uniform(-18, -4)), float(r.uniform(1, 10)), float(r.uniform(-1, 1)))
    return SceneGeometry(
        bs=bs, irs=[irs], targets=[tgt],
        bs_upa=UpaConfig(int(r.integers(2, max_side + 1)), int(r.integers(2, max_side + 1))),
        irs_upa=[UpaConfig(int(r.integers(2, max_side + 1)), int(r.integers(2, max_side + 1)))],
    )
