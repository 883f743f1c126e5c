"""Tabular data ingestion, preprocessing, splitting and run manifests."""

from __future__ import annotations

import configparser
import hashlib
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .targets import BayesLogistic, DataError

MAGIC_COLUMNS = ["fLength", "fWidth", "fSize", "fConc", "fConc1", "fAsym",
                 "fM3Long", "fM3Trans", "fAlpha", "fDist", "class"]
MAGIC_DROPPED = "fDist"
TITANIC_COLUMNS = ["PassengerId", "Survived", "Pclass", "Name", "Sex", "Age", "SibSp",
                   "Parch", "Ticket", "Fare", "Cabin", "Embarked"]
TITANIC_FEATURES = ["Pclass", "Sex", "Age", "SibSp", "Parch", "Fare",
                    "Embarked_C", "Embarked_Q", "Embarked_S"]


class DroppedRowsWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class TabularDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()
    provenance: str = ""
    n_dropped: int = 0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise DataError("features must be (n, d) with one label per row")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain missing or non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(int))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, note=""):
        return replace(self, features=self.features[idx], labels=self.labels[idx],
                       provenance=self.provenance + note)

    def potential(self) -> BayesLogistic:
        return BayesLogistic(self.features, self.labels)


@dataclass(frozen=True)
class CsvSchema:
    """Column roles: numeric ``features`` and a binary ``label``.

    ``label_map`` translates raw label strings to 0/1; without it labels must
    already be 0/1. ``names`` supplies column names for headerless files.
    """

    features: tuple
    label: str
    label_map: dict | None = None
    names: tuple | None = None


def load_csv(path, schema: CsvSchema, provenance=None) -> TabularDataset:
    """Read a comma-separated file and keep rows whose required fields parse.

    Rows with the wrong number of fields or unparseable values are dropped;
    the count is reported through a :class:`DroppedRowsWarning` and stored
    on the result.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    bad = []
    kw = {"header": None, "names": list(schema.names)} if schema.names else {}
    df = pd.read_csv(path, dtype=str, skipinitialspace=True, engine="python",
                     on_bad_lines=lambda line: bad.append(line), **kw)
    needed = list(schema.features) + [schema.label]
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataError(f"{path.name}: missing required column(s) {', '.join(missing)}")
    X = df[list(schema.features)].apply(pd.to_numeric, errors="coerce")
    raw = df[schema.label].str.strip()
    if schema.label_map is not None:
        y = raw.map({str(k): v for k, v in schema.label_map.items()})
    else:
        y = pd.to_numeric(raw, errors="coerce")
        y = y.where(y.isin([0, 1]))
    ok = X.notna().all(axis=1) & np.isfinite(X.to_numpy(dtype=float)).all(axis=1) & y.notna()
    n_dropped = len(bad) + int((~ok).sum())
    if n_dropped:
        warnings.warn(f"{path.name}: dropped {n_dropped} malformed row(s)", DroppedRowsWarning,
                      stacklevel=2)
    if not ok.any():
        raise DataError(f"{path.name}: no usable rows")
    return TabularDataset(X[ok].to_numpy(dtype=float), y[ok].to_numpy(dtype=int),
                          tuple(schema.features), provenance or str(path), n_dropped)


# ---------------------------------------------------------------------------
# Standardization and splitting
# ---------------------------------------------------------------------------

def standardize(data: TabularDataset, reference: TabularDataset | None = None) -> TabularDataset:
    """Zero-mean, unit-variance columns using statistics of ``reference`` (default: ``data``).

    Constant columns are centred only.
    """
    ref = data if reference is None else reference
    mu = ref.features.mean(axis=0)
    sd = ref.features.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return replace(data, features=(data.features - mu) / sd)


def load_magic(path, standardized=True) -> TabularDataset:
    """MAGIC gamma telescope file (``magic04.data``, headerless or with header).

    Gamma (``g``) is class 1, hadron (``h``) class 0. The ``fDist`` column is
    dropped, leaving nine features.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path) as fh:
        first = fh.readline()
    headerless = first.split(",")[0].strip() not in MAGIC_COLUMNS
    feats = tuple(c for c in MAGIC_COLUMNS[:-1] if c != MAGIC_DROPPED)
    schema = CsvSchema(feats, "class", {"g": 1, "h": 0},
                       tuple(MAGIC_COLUMNS) if headerless else None)
    data = load_csv(path, schema, provenance=f"MAGIC gamma telescope ({path.name})")
    return standardize(data) if standardized else data


def preprocess_titanic(raw: pd.DataFrame, standardized=True) -> TabularDataset:
    """Turn the raw passenger table into nine numeric features.

    Identifier, name, ticket and cabin columns are dropped; sex becomes
    ``male = 1``; embarkation port is one-hot encoded after filling gaps with
    the most common port; missing ages and fares take the column median.
    """
    missing = [c for c in TITANIC_COLUMNS if c not in raw.columns]
    if missing:
        raise DataError(f"Titanic table lacks column(s) {', '.join(missing)}")
    df = raw.drop(columns=["PassengerId", "Name", "Ticket", "Cabin"]).copy()
    sex = df["Sex"].astype(str).str.strip().str.lower()
    if not sex.isin(["male", "female"]).all():
        raise DataError("Sex must be 'male' or 'female'")
    df["Sex"] = (sex == "male").astype(float)
    for col in ["Pclass", "Age", "SibSp", "Parch", "Fare", "Survived"]:
        df[col] = pd.to_numeric(df[col], errors="coerce")
    df["Age"] = df["Age"].fillna(df["Age"].median())
    df["Fare"] = df["Fare"].fillna(df["Fare"].median())
    port = df["Embarked"].astype("string").str.strip()
    port = port.where(port.isin(["C", "Q", "S"]))
    port = port.fillna(port.mode().iloc[0])
    for p in "CQS":
        df[f"Embarked_{p}"] = (port == p).astype(float)
    if df[["Pclass", "SibSp", "Parch", "Survived"]].isna().any().any():
        raise DataError("Titanic table has missing values outside Age/Fare/Embarked")
    data = TabularDataset(df[TITANIC_FEATURES].to_numpy(dtype=float),
                          df["Survived"].to_numpy(dtype=int), TITANIC_FEATURES, "Titanic")
    return standardize(data) if standardized else data


def load_titanic(path, standardized=True) -> TabularDataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    data = preprocess_titanic(pd.read_csv(path), standardized)
    return replace(data, provenance=f"Titanic ({path.name})")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie strictly between 0 and 1")


def split_indices(n, spec: SplitSpec):
    n_test = int(np.floor(n * spec.test_fraction + 0.5))
    if n_test == 0 or n_test == n:
        raise DataError(f"split of {n} rows with fraction {spec.test_fraction} leaves an empty part")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(data: TabularDataset, spec: SplitSpec):
    """Random train/test partition with ``round(n * test_fraction)`` test rows."""
    tr, te = split_indices(data.n, spec)
    return data.subset(tr, " [train]"), data.subset(te, " [test]")


def split_standardized(data: TabularDataset, spec: SplitSpec, stats="full"):
    """Split raw data and standardize with full-data (``"full"``) or train-only statistics."""
    if stats not in ("full", "train"):
        raise ValueError("stats must be 'full' or 'train'")
    if stats == "full":
        return split(standardize(data), spec)
    train, test = split(data, spec)
    return standardize(train), standardize(test, train)


def synthetic_dataset(potential: BayesLogistic, note="synthetic") -> TabularDataset:
    names = [f"x{i}" for i in range(potential.dim)]
    return TabularDataset(potential.features, potential.labels, names, note)


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def sha256_file(path, chunk=1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(chunk), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, sections: dict):
    """Write nested ``{section: {key: value}}`` as INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for name, items in sections.items():
        cp[name] = {k: str(v) for k, v in items.items()}
    with open(path, "w") as fh:
        cp.write(fh)


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no manifest at {path}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(path)
    return {s: dict(cp[s]) for s in cp.sections()}
