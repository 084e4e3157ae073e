"""
Seeded synthetic two-class datasets with planted spectral structure
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .atlas_graph import GftBasis, Roi, RoiAtlas
from .errors import DataError, DimensionMismatchError, UsageError
from .spectra import Label, SubjectRecord

logger = logging.getLogger(__name__)

PSD_TOL = 1e-10

# strength of the planted mode over the isotropic background, per preset
PLANTED_STRENGTHS: Dict[str, float] = {"strong": 20.0, "weak": 0.5, "none": 0.0}


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Generator parameters

    Templates are r x r covariances in GFT-coefficient space, one per class.
    """
    r: int
    n_subjects: int
    T: int
    alpha_asd: float
    template_asd: np.ndarray = field(repr=False)
    template_nt: np.ndarray = field(repr=False)
    noise: float = 0.0
    seed: int = 0

    def validate(self):
        if self.r < 2:
            raise UsageError(f"synthetic r must be >= 2, got {self.r}")
        if self.n_subjects < 2:
            raise UsageError(f"need at least 2 subjects, got {self.n_subjects}")
        if self.T < 2:
            raise UsageError(f"need at least 2 time-points, got {self.T}")
        if not 0.0 < self.alpha_asd < 1.0:
            raise UsageError(f"alpha_asd must be in (0, 1), got {self.alpha_asd}")
        if self.noise < 0:
            raise UsageError(f"noise level must be >= 0, got {self.noise}")

        for name, template in (("ASD", self.template_asd), ("NT", self.template_nt)):
            template = np.asarray(template, dtype=float)
            if template.shape != (self.r, self.r):
                raise DimensionMismatchError(f"{name} template has shape {template.shape}, expected {(self.r, self.r)}")
            if not np.allclose(template, template.T, rtol=0.0, atol=PSD_TOL):
                raise DataError(f"{name} template is not symmetric")
            lowest = float(np.linalg.eigvalsh(template).min())
            if lowest < -PSD_TOL:
                raise DataError(f"non-psd {name} template (smallest eigenvalue {lowest:.3g})")

    @property
    def n_asd(self) -> int:
        n_asd = int(np.floor(self.alpha_asd * self.n_subjects + 0.5))
        return min(max(n_asd, 1), self.n_subjects - 1)


def planted_templates(r: int, mode_asd: int, mode_nt: int, strength: float,
                      background: float = 1.0) -> Dict[Label, np.ndarray]:
    """
    Isotropic background plus one boosted GFT mode per class

    Args:
        r: Number of modes
        mode_asd: 0-based mode boosted for ASD subjects
        mode_nt: 0-based mode boosted for NT subjects
        strength: Extra variance on the boosted mode
        background: Variance on every mode

    Returns:
        {Label.ASD: template, Label.NT: template}
    """
    for mode in (mode_asd, mode_nt):
        if not 0 <= mode < r:
            raise UsageError(f"planted mode {mode} outside 0..{r - 1}")
    templates = {}
    for label, mode in ((Label.ASD, mode_asd), (Label.NT, mode_nt)):
        template = background * np.eye(r)
        template[mode, mode] += strength
        templates[label] = template
    return templates


def default_planted_modes(r: int) -> tuple:
    """Two distinct mid-spectrum modes (0-based)"""
    return max(r // 4, 0), max(r // 2, 1)


def preset_spec(preset: str, r: int, n_subjects: int, T: int, alpha_asd: float = 0.5,
                noise: float = 0.1, seed: int = 0,
                modes: Optional[Sequence[int]] = None) -> SyntheticSpec:
    """SyntheticSpec for a named planted-signal preset (strong, weak, none)"""
    if preset not in PLANTED_STRENGTHS:
        raise UsageError(f"unknown planted preset {preset!r} (choose from {', '.join(PLANTED_STRENGTHS)})")
    mode_asd, mode_nt = modes if modes is not None else default_planted_modes(r)
    templates = planted_templates(r, mode_asd, mode_nt, PLANTED_STRENGTHS[preset])
    return SyntheticSpec(r=r, n_subjects=n_subjects, T=T, alpha_asd=alpha_asd,
                         template_asd=templates[Label.ASD], template_nt=templates[Label.NT],
                         noise=noise, seed=seed)


def _psd_root(template: np.ndarray) -> np.ndarray:
    values, vectors = scipy.linalg.eigh((template + template.T) / 2.0)
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def generate_synthetic(spec: SyntheticSpec, basis: GftBasis) -> List[SubjectRecord]:
    """
    Draw subjects whose GFT coefficients follow their class template

    Each time column is X = V c + noise, with c ~ N(0, template) and
    isotropic Gaussian noise in the ROI domain.

    Args:
        spec: Generator parameters
        basis: GFT basis the templates are expressed in

    Returns:
        Subjects ``synth-0001`` ... in generation order
    """
    spec.validate()
    if basis.r != spec.r:
        raise DimensionMismatchError(f"basis has {basis.r} modes, synthetic spec asks for {spec.r}")

    rng = np.random.default_rng(spec.seed)
    n_asd = spec.n_asd
    labels = np.array([Label.ASD] * n_asd + [Label.NT] * (spec.n_subjects - n_asd), dtype=object)
    labels = labels[rng.permutation(spec.n_subjects)]

    roots = {Label.ASD: _psd_root(np.asarray(spec.template_asd, dtype=float)),
             Label.NT: _psd_root(np.asarray(spec.template_nt, dtype=float))}
    V = basis.eigenvectors

    subjects = []
    for i, label in enumerate(labels, 1):
        coefficients = roots[label] @ rng.standard_normal((spec.r, spec.T))
        X = V @ coefficients
        if spec.noise > 0:
            X = X + spec.noise * rng.standard_normal((spec.r, spec.T))
        subjects.append(SubjectRecord(id=f"synth-{i:04d}", label=label, X=X))

    logger.debug("Generated %d synthetic subjects (%d ASD)", spec.n_subjects, n_asd)
    return subjects


def permute_labels(subjects: Sequence[SubjectRecord], seed: int) -> List[SubjectRecord]:
    """Same signals with the labels shuffled (chance-level control)"""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subjects))
    return [replace(subject, label=subjects[j].label) for subject, j in zip(subjects, order)]


def synthetic_atlas(r: int, seed: int = 0, extent: float = 70.0) -> RoiAtlas:
    """Atlas of r random centroids (mm, two decimals) named ROI1..ROIr"""
    if r < 2:
        raise UsageError(f"synthetic atlas needs r >= 2, got {r}")
    rng = np.random.default_rng(seed)
    while True:
        coords = np.round(rng.uniform(-extent, extent, size=(r, 3)), 2)
        if len({tuple(c) for c in coords}) == r:
            break
    rois = tuple(Roi(index=i, name=f"ROI{i}", coord=tuple(float(c) for c in coord))
                 for i, coord in enumerate(coords, 1))
    return RoiAtlas(rois)
