import numpy as np
import pytest

from hamr3d import constants, media
from hamr3d.llb import LlbParams


@pytest.fixture(scope="session")
def bottom_stats():
    return media.LayerStats(**constants.BOTTOM_LAYER)


@pytest.fixture(scope="session")
def top_stats():
    return media.LayerStats(**constants.TOP_LAYER)


@pytest.fixture()
def uniform_bottom_stack(bottom_stats):
    """Small dispersion-free single-layer stack of bottom-layer material."""
    from dataclasses import replace
    stats = replace(bottom_stats, sigma_Tc=0.0, sigma_Ku=0.0, sigma_volume=0.0)
    stack = media.build_stack([stats], 24.0, 24.0, seed=1)
    media.dc_erase(stack, 1, 0.0)
    return stack


def grain_volume_cc():
    """Nominal grain volume (6 nm circle x 6 nm thickness) in cc."""
    return np.pi * 9.0 * 6.0 * 1e-21
