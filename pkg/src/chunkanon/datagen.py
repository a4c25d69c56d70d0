"""Deterministic synthetic patient records, written as chunked CSV.

Columns: three direct identifiers (Patient ID, Name, Address), two
categorical QIDs (Blood Group, Profession), three numerical QIDs (Age,
BMI, PIN Code) and one sensitive attribute (Health Condition).

Categoricals are uniform. Age is triangular on [19, 85] peaking at 40, BMI
is normal(24, 3) clamped to [12.0, 35.9], and PIN codes are Zipf-skewed
over a fixed pool of 1347 codes in the 560000-561999 band; the skew is
what forces real generalisation at large ``k``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .schema import AttributeKind, CategoricalHierarchy, DatasetSchema, NumericalLadder, QidSpec

COLUMNS = [
    ("Patient ID", AttributeKind.DIRECT_IDENTIFIER),
    ("Name", AttributeKind.DIRECT_IDENTIFIER),
    ("Address", AttributeKind.DIRECT_IDENTIFIER),
    ("Blood Group", AttributeKind.CATEGORICAL_QID),
    ("Profession", AttributeKind.CATEGORICAL_QID),
    ("Age", AttributeKind.NUMERICAL_QID),
    ("BMI", AttributeKind.NUMERICAL_QID),
    ("PIN Code", AttributeKind.NUMERICAL_QID),
    ("Health Condition", AttributeKind.SENSITIVE),
]

BLOOD_GROUPS = {
    "A+": ["A", "*"],
    "A-": ["A", "*"],
    "B+": ["B", "*"],
    "B-": ["B", "*"],
    "AB+": ["AB", "*"],
    "AB-": ["AB", "*"],
    "O+": ["O", "*"],
    "O-": ["O", "*"],
}

_DOMAINS = {
    "Healthcare": ("Service Sector", ["Medical Specialist", "Nurse", "Pharmacist", "Physiotherapist"]),
    "Education": ("Service Sector", ["Teacher", "Professor", "Librarian", "Counsellor"]),
    "Creative": ("Non-Service", ["Graphic Designer", "Mixed Media Artist", "Writer", "Musician"]),
    "Engineering": ("Non-Service", ["Data Scientist", "Software Engineer", "Project Manager", "Product Manager"]),
}
PROFESSIONS = {job: [domain, sector, "*"] for domain, (sector, jobs) in _DOMAINS.items() for job in jobs}

HEALTH_CONDITIONS = [
    "Asthma",
    "Dementia",
    "Diabetes",
    "Gout",
    "Hypertension",
    "Migraine",
    "Arthritis",
    "Anaemia",
    "Thyroid Disorder",
    "Healthy",
]

PIN_BAND = (560000, 561999)
PIN_POOL_SIZE = 1347

_FIRST = [
    "Aarav", "Alka", "Chandani", "Deepa", "Ekaraj", "Farah", "Gaurav", "Harini", "Ishaan", "Jack",
    "Kavya", "Lakshmi", "Manoj", "Nakul", "Nisha", "Omkar", "Priya", "Rahul", "Sanjana", "Tarun",
]
_LAST = [
    "Bahl", "Chopra", "Das", "Gupta", "Iyer", "Kumar", "Lanka", "Menon", "Nair", "Parikh",
    "Prabhakar", "Rao", "Reddy", "Shankar", "Sharma", "Tandon", "Varma", "Yadav",
]
_STREETS = ["Kala Road", "Ganesh Chowk", "Sule Circle", "Bahl Marg", "Nadig Zila", "MG Road", "Lake View", "Hill Street"]


def pin_pool() -> np.ndarray:
    """The fixed, sorted pool of PIN codes every generation draws from."""
    rng = np.random.default_rng(PIN_POOL_SIZE)
    lo, hi = PIN_BAND
    return np.sort(rng.choice(np.arange(lo, hi + 1), size=PIN_POOL_SIZE, replace=False))


def medical_schema(chunk_rows: int = 1_000_000, record_bytes: int | None = None) -> DatasetSchema:
    qids = (
        QidSpec("Blood Group", AttributeKind.CATEGORICAL_QID, CategoricalHierarchy.from_rows(BLOOD_GROUPS), 3),
        QidSpec("Profession", AttributeKind.CATEGORICAL_QID, CategoricalHierarchy.from_rows(PROFESSIONS), 2),
        QidSpec("Age", AttributeKind.NUMERICAL_QID, NumericalLadder(1, 19, 85, (1, 2, 4, 8, 16, 32, 64, 67)), 1),
        QidSpec("BMI", AttributeKind.NUMERICAL_QID, NumericalLadder(0.1, 120, 359, (1, 10, 20, 40, 80, 240), anchor=10), 4),
        QidSpec(
            "PIN Code",
            AttributeKind.NUMERICAL_QID,
            NumericalLadder(1, PIN_BAND[0], PIN_BAND[1], tuple(2**i for i in range(11)) + (PIN_POOL_SIZE,)),
            5,
            encode=True,
        ),
    )
    return DatasetSchema(columns=tuple(COLUMNS), qids=qids, record_bytes=record_bytes, chunk_rows=chunk_rows)


@dataclass(frozen=True)
class GeneratorRecipe:
    seed: int = 0
    rows_per_chunk: int = 10_000
    num_chunks: int = 1
    age_mode: float = 40.0
    bmi_mean: float = 24.0
    bmi_sd: float = 3.0
    pin_zipf: float = 1.1


def generate_chunk(recipe: GeneratorRecipe, index: int) -> pd.DataFrame:
    rng = np.random.default_rng([recipe.seed, index])
    n = recipe.rows_per_chunk
    start = index * n

    ids = [f"P{start + i + 1:07d}-{d:04d}-{c}" for i, (d, c) in enumerate(zip(rng.integers(0, 10_000, n), rng.integers(1, 4, n)))]
    names = pd.Series(rng.choice(_FIRST, n)) + " " + pd.Series(rng.choice(_LAST, n))
    addresses = (
        pd.Series(rng.integers(1, 500, n)).astype(str) + ", " + pd.Series(rng.choice(_STREETS, n))
    )
    blood = rng.choice(list(BLOOD_GROUPS), n)
    jobs = rng.choice(list(PROFESSIONS), n)
    age = np.clip(np.floor(rng.triangular(19, recipe.age_mode, 86, n)), 19, 85).astype(int)
    bmi = np.clip(np.round(rng.normal(recipe.bmi_mean, recipe.bmi_sd, n), 1), 12.0, 35.9)

    pool = pin_pool()
    # Popularity order is a fixed shuffle of the pool, independent of the recipe seed.
    popularity = np.random.default_rng(7).permutation(len(pool))
    weights = 1.0 / np.arange(1, len(pool) + 1) ** recipe.pin_zipf
    pins = pool[popularity[rng.choice(len(pool), n, p=weights / weights.sum())]]
    if index == 0:
        # Every pool code appears at least once in any generation with >= 1347 rows.
        head = min(n, len(pool))
        pins[:head] = pool[rng.permutation(len(pool))[:head]]

    return pd.DataFrame(
        {
            "Patient ID": ids,
            "Name": names,
            "Address": addresses,
            "Blood Group": blood,
            "Profession": jobs,
            "Age": age.astype(str),
            "BMI": [f"{x:.1f}" for x in bmi],
            "PIN Code": pins.astype(str),
            "Health Condition": rng.choice(HEALTH_CONDITIONS, n),
        }
    )


def generate(recipe: GeneratorRecipe, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(recipe.num_chunks):
        path = out / f"chunk_{i:05d}.csv"
        generate_chunk(recipe, i).to_csv(path, index=False, lineterminator="\n")
        paths.append(path)
    (out / "recipe.json").write_text(json.dumps(asdict(recipe), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def generate_frame(recipe: GeneratorRecipe) -> pd.DataFrame:
    return pd.concat([generate_chunk(recipe, i) for i in range(recipe.num_chunks)], ignore_index=True)
