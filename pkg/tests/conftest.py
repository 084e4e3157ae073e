"""
Shared fixtures: small atlases, path graphs and seeded synthetic cohorts
"""

from typing import List, Optional, Sequence

import numpy as np
import pytest

from graphfkt.atlas_graph import BrainGraph, GraphKind, Roi, RoiAtlas, build_graph, gft_basis, load_atlas
from graphfkt.config import DEFAULT_ATLAS_PATH
from graphfkt.spectra import Label, SubjectRecord
from graphfkt.synthetic import generate_synthetic, preset_spec, synthetic_atlas


def make_atlas(coords: Sequence[Sequence[float]], names: Optional[Sequence[str]] = None) -> RoiAtlas:
    names = names or [f"R{i}" for i in range(1, len(coords) + 1)]
    return RoiAtlas(tuple(Roi(i, name, tuple(float(c) for c in coord))
                          for i, (name, coord) in enumerate(zip(names, coords), 1)))


def path_graph(r: int) -> BrainGraph:
    """Unit-weight path 1 - 2 - ... - r"""
    adjacency = np.zeros((r, r))
    for i in range(r - 1):
        adjacency[i, i + 1] = adjacency[i + 1, i] = 1.0
    return BrainGraph(adjacency, GraphKind.UC)


def random_subjects(r: int, n_asd: int, n_nt: int, T: int, seed: int) -> List[SubjectRecord]:
    """Gaussian signals, labels alternating while both classes last"""
    rng = np.random.default_rng(seed)
    labels = []
    a, b = n_asd, n_nt
    while a or b:
        if a:
            labels.append(Label.ASD)
            a -= 1
        if b:
            labels.append(Label.NT)
            b -= 1
    return [SubjectRecord(id=f"s{i:03d}", label=label, X=rng.standard_normal((r, T)))
            for i, label in enumerate(labels, 1)]


@pytest.fixture(scope="session")
def aal_atlas() -> RoiAtlas:
    return load_atlas(DEFAULT_ATLAS_PATH)


@pytest.fixture(scope="session")
def aal_knn2_basis(aal_atlas):
    return gft_basis(build_graph(aal_atlas, "knn", K=2))


@pytest.fixture
def small_atlas() -> RoiAtlas:
    return synthetic_atlas(12, seed=1)


@pytest.fixture
def small_basis(small_atlas):
    return gft_basis(build_graph(small_atlas, "knn", K=3))


@pytest.fixture(scope="session")
def planted_small():
    """r=10, 40 subjects, strong planted modes; (atlas, subjects)"""
    atlas = synthetic_atlas(10, seed=5)
    basis = gft_basis(build_graph(atlas, "knn", K=2))
    spec = preset_spec("strong", r=10, n_subjects=40, T=60, noise=0.1, seed=5)
    return atlas, generate_synthetic(spec, basis)


@pytest.fixture(scope="session")
def planted_large():
    """r=20, 200 subjects, T=100, strong planted modes; (atlas, subjects)"""
    atlas = synthetic_atlas(20, seed=0)
    basis = gft_basis(build_graph(atlas, "knn", K=2))
    spec = preset_spec("strong", r=20, n_subjects=200, T=100, noise=0.1, seed=0)
    return atlas, generate_synthetic(spec, basis)
