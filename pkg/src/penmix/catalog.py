"""The 72-model simulation catalog, dataset sampling, and EM starting values.

Four categories of ground-truth mixtures are indexed as
``<category>.<mean_config>.<cov_config>``:

    I   two-component bivariate    (p=2, d=2, n=200)
    II  three-component bivariate  (p=3, d=2, n=300)
    III two-component trivariate   (p=2, d=3, n=300)
    IV  three-component trivariate (p=3, d=3, n=300)

Bivariate covariances are built from eigenvalues and a rotation angle,
trivariate ones from eigenvalues and three rotation angles.  All catalog
values are hard-coded as exact rationals and pi-multiples; the catalog is
a fixture, not configuration.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import UnknownModel
from .mixture import MixingDistribution, sample_covariance, sample_mean, validate_data

CATEGORIES = ("I", "II", "III", "IV")

# category -> (p, d, n)
_SHAPE = {"I": (2, 2, 200), "II": (3, 2, 300), "III": (2, 3, 300), "IV": (3, 3, 300)}

_WEIGHTS = {
    "I": (0.3, 0.7),
    "II": (0.15, 0.35, 0.50),
    "III": (0.3, 0.7),
    "IV": (0.15, 0.35, 0.50),
}

_MEAN_LABELS = {
    "I": ("near", "moderate", "distant"),
    "II": ("straight", "acute", "obtuse"),
    "III": ("near", "moderate", "distant"),
    "IV": ("straight", "acute", "obtuse"),
}

_MEANS = {
    "I": {
        1: ((0.0, -1.0), (0.0, 1.0)),
        2: ((0.0, -3.0), (0.0, 3.0)),
        3: ((0.0, -5.0), (0.0, 5.0)),
    },
    "II": {
        1: ((0.0, -2.0), (0.0, 0.0), (0.0, 2.0)),
        2: ((0.0, -2.0), (3.0, 0.0), (0.0, 2.0)),
        3: ((0.0, -2.0), (1.0, 0.0), (0.0, 2.0)),
    },
    "III": {
        1: ((0.0, 0.0, -1.0), (0.0, 0.0, 1.0)),
        2: ((0.0, 0.0, -3.0), (0.0, 0.0, 3.0)),
        3: ((0.0, 0.0, -5.0), (0.0, 0.0, 5.0)),
    },
    "IV": {
        1: ((0.0, 0.0, -2.0), (0.0, 0.0, 0.0), (0.0, 0.0, 2.0)),
        2: ((0.0, 0.0, -2.0), (0.0, 3.0, 0.0), (0.0, 0.0, 2.0)),
        3: ((0.0, 0.0, -2.0), (0.0, 1.0, 0.0), (0.0, 0.0, 2.0)),
    },
}

_PI = math.pi

# (lambda1, lambda2, theta) per component
_COVS_2D = {
    "I": {
        1: ((1, 1, 0.0), (1, 1, 0.0)),
        2: ((1, 5, 0.0), (1, 1, 0.0)),
        3: ((1, 5, _PI / 4), (1, 1, 0.0)),
        4: ((1, 5, _PI / 2), (1, 1, 0.0)),
        5: ((1, 5, _PI / 4), (1, 5, 0.0)),
        6: ((1, 5, _PI / 2), (1, 5, 0.0)),
    },
    "II": {
        1: ((1, 1, 0.0), (1, 1, 0.0), (1, 1, 0.0)),
        2: ((1, 1, 0.0), (1, 1, 0.0), (1, 5, 0.0)),
        3: ((1, 1, 0.0), (1, 5, 0.0), (1, 5, _PI / 4)),
        4: ((1, 1, 0.0), (1, 5, 0.0), (1, 5, _PI / 2)),
        5: ((1, 5, 0.0), (1, 5, _PI / 4), (1, 5, -_PI / 4)),
        6: ((1, 5, 0.0), (1, 5, _PI / 4), (1, 5, -_PI / 2)),
    },
}

# ((lambda1, lambda2, lambda3), (alpha, beta, gamma)) per component
_ZERO3 = (0.0, 0.0, 0.0)
_L111 = (1, 1, 1)
_L1310 = (1, 3, 10)
_COVS_3D = {
    "III": {
        1: ((_L111, _ZERO3), (_L111, _ZERO3)),
        2: ((_L111, _ZERO3), (_L1310, _ZERO3)),
        3: ((_L1310, _ZERO3), (_L1310, _ZERO3)),
        4: ((_L1310, _ZERO3), (_L1310, (-_PI / 3, _PI / 3, _PI / 3))),
        5: ((_L1310, _ZERO3), (_L1310, (_PI / 3, -_PI / 3, _PI / 3))),
        6: ((_L1310, _ZERO3), (_L1310, (_PI / 3, _PI / 3, -_PI / 3))),
    },
    "IV": {
        1: ((_L111, _ZERO3), (_L111, _ZERO3), (_L111, _ZERO3)),
        2: ((_L111, _ZERO3), (_L111, _ZERO3), (_L1310, _ZERO3)),
        3: ((_L111, _ZERO3), (_L1310, _ZERO3), (_L1310, (-_PI / 3, _PI / 3, _PI / 3))),
        4: ((_L111, _ZERO3), (_L1310, _ZERO3), (_L1310, (_PI / 3, -_PI / 3, _PI / 3))),
        5: ((_L1310, _ZERO3), (_L1310, (-_PI / 3, _PI / 3, _PI / 3)), (_L1310, (_PI / 3, -_PI / 3, _PI / 3))),
        6: ((_L1310, _ZERO3), (_L1310, (_PI / 3, -_PI / 3, _PI / 3)), (_L1310, (_PI / 3, _PI / 3, -_PI / 3))),
    },
}


@dataclass(frozen=True)
class CovParams2D:
    """Eigenvalues and orientation angle of a bivariate covariance."""

    lambda1: float
    lambda2: float
    theta: float

    def __post_init__(self):
        if not (self.lambda1 > 0.0 and self.lambda2 > 0.0):
            raise ValueError("eigenvalues must be positive")


@dataclass(frozen=True)
class CovParams3D:
    """Eigenvalues and rotation angles of a trivariate covariance."""

    lambda1: float
    lambda2: float
    lambda3: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.lambda1 > 0.0 and self.lambda2 > 0.0 and self.lambda3 > 0.0):
            raise ValueError("eigenvalues must be positive")


def rotation_2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_3d(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Rotation about the x axis by alpha, then y by beta, then z by gamma.

    This composition reproduces the catalog's published trivariate
    covariance entries; it is a proper rotation (orthogonal, det = +1)
    for every angle triple.
    """
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def _snap_tiny(m: np.ndarray) -> np.ndarray:
    # rotation round-off leaves +-1e-16 residue where entries are exact zeros
    m[np.abs(m) < 1e-12 * np.abs(m).max()] = 0.0
    return m


def build_cov_2d(params: CovParams2D) -> np.ndarray:
    """R(theta) diag(lambda1, lambda2) R(theta)^T."""
    r = rotation_2d(params.theta)
    return _snap_tiny(linalg.symmetrize(r @ np.diag([params.lambda1, params.lambda2]) @ r.T))


def build_cov_3d(params: CovParams3D) -> np.ndarray:
    """R(alpha, beta, gamma) diag(lambda1..3) R^T."""
    r = rotation_3d(params.alpha, params.beta, params.gamma)
    lam = np.diag([params.lambda1, params.lambda2, params.lambda3])
    return _snap_tiny(linalg.symmetrize(r @ lam @ r.T))


@dataclass(frozen=True)
class ModelSpec:
    """One catalog entry: category plus mean and covariance configuration."""

    category: str
    mean_config: int
    cov_config: int

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise UnknownModel(f"unknown category {self.category!r}")
        if self.mean_config not in (1, 2, 3):
            raise UnknownModel(f"mean config {self.mean_config} out of range 1..3")
        if self.cov_config not in (1, 2, 3, 4, 5, 6):
            raise UnknownModel(f"cov config {self.cov_config} out of range 1..6")

    @property
    def order(self) -> int:
        return _SHAPE[self.category][0]

    @property
    def dim(self) -> int:
        return _SHAPE[self.category][1]

    @property
    def n(self) -> int:
        return _SHAPE[self.category][2]

    @property
    def mean_label(self) -> str:
        return _MEAN_LABELS[self.category][self.mean_config - 1]

    @property
    def model_id(self) -> str:
        return f"{self.category}.{self.mean_config}.{self.cov_config}"

    @property
    def model_index(self) -> int:
        """Position in the canonical enumeration of all 72 models."""
        return (
            CATEGORIES.index(self.category) * 18
            + (self.mean_config - 1) * 6
            + (self.cov_config - 1)
        )


def parse_model_id(model_id: str) -> ModelSpec:
    parts = model_id.strip().split(".")
    if len(parts) != 3:
        raise UnknownModel(f"malformed model id {model_id!r}")
    category = parts[0]
    try:
        mean_config, cov_config = int(parts[1]), int(parts[2])
    except ValueError:
        raise UnknownModel(f"malformed model id {model_id!r}") from None
    return ModelSpec(category, mean_config, cov_config)


def all_models() -> list:
    """All 72 catalog models in canonical order."""
    return [
        ModelSpec(cat, m, v)
        for cat in CATEGORIES
        for m in (1, 2, 3)
        for v in (1, 2, 3, 4, 5, 6)
    ]


def resolve_model(spec: ModelSpec) -> MixingDistribution:
    """Ground-truth mixing distribution for a catalog entry."""
    weights = np.array(_WEIGHTS[spec.category])
    means = np.array(_MEANS[spec.category][spec.mean_config])
    if spec.dim == 2:
        rows = _COVS_2D[spec.category][spec.cov_config]
        covs = np.stack([build_cov_2d(CovParams2D(*row)) for row in rows])
    else:
        rows = _COVS_3D[spec.category][spec.cov_config]
        covs = np.stack([build_cov_3d(CovParams3D(*lams, *angles)) for lams, angles in rows])
    return MixingDistribution(weights, means, covs)


def sample(g: MixingDistribution, n: int, seed: int) -> np.ndarray:
    """Draw n i.i.d. observations from the mixture, deterministic in seed.

    Component labels are drawn first, then one standard normal block which
    is colored per component by its Cholesky factor.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(g.order, size=n, p=g.weights)
    z = rng.standard_normal((n, g.dim))
    out = np.empty((n, g.dim))
    for j in range(g.order):
        idx = labels == j
        if not np.any(idx):
            continue
        L = linalg.cholesky_lower(g.covs[j])
        out[idx] = g.means[j] + z[idx] @ L.T
    return out


def make_starts(data: np.ndarray, truth: MixingDistribution, seed: int) -> list:
    """The ten EM starting values used by the simulation protocol.

    Start 0 is the truth itself; starts 1..4 perturb every component mean
    of the truth.  Starts 5..9 are data-based: equal weights, all
    covariances set to the sample covariance, and component means set to
    the sample mean plus a perturbation.  Perturbations are uniform per
    coordinate on [-s_k, s_k] with s_k the per-coordinate sample standard
    deviation, which keeps the starts on the scale of the data.
    """
    data = validate_data(data)
    if truth.dim != data.shape[1]:
        raise ValueError(f"truth dim {truth.dim} != data dim {data.shape[1]}")
    rng = np.random.default_rng(seed)
    p, d = truth.order, truth.dim
    scale = data.std(axis=0, ddof=1)
    starts = [truth]
    for _ in range(4):
        means = truth.means + rng.uniform(-scale, scale, size=(p, d))
        starts.append(MixingDistribution(truth.weights, means, truth.covs))
    xbar = sample_mean(data)
    s_x = sample_covariance(data)
    equal_weights = np.full(p, 1.0 / p)
    covs = np.broadcast_to(s_x, (p, d, d))
    for _ in range(5):
        means = xbar + rng.uniform(-scale, scale, size=(p, d))
        starts.append(MixingDistribution(equal_weights, means, covs))
    return starts


def replication_seed(base_seed: int, model_index: int, rep_index: int) -> int:
    """Deterministic per-replication seed.

    Distinct across models and replications as long as rep_index <= 999;
    the start-value perturbations use a separately derived stream.
    """
    return base_seed * 10 ** 6 + model_index * 10 ** 3 + rep_index


def start_seed(rep_seed: int) -> int:
    """Sub-seed for start perturbations, disjoint from replication seeds."""
    return rep_seed * 1_000_003 + 1
