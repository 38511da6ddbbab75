import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import pandas as pd

COUNT_COLUMN = "count"
RULE_COLUMN = "d"
RESERVED_COLUMNS = (COUNT_COLUMN, RULE_COLUMN)

# Duplicate value vectors are merged only when their rules agree this closely.
RULE_MERGE_TOLERANCE = 1e-12


class DatasetError(Exception):
    pass


class MissingColumnError(DatasetError):
    pass


class BadProbabilityError(DatasetError):
    pass


class BadCountError(DatasetError):
    pass


class ConflictingRuleError(DatasetError):
    pass


class ZeroTotalError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class Role(str, Enum):
    PUBLIC = "public"
    SENSITIVE = "sensitive"


@dataclass(frozen=True)
class Attribute:
    name: str
    domain: tuple[str, ...]
    role: Role


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple[Attribute, ...]

    def __post_init__(self) -> None:
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"Attribute names must be unique: {names}")
        roles = {a.role for a in self.attributes}
        if Role.PUBLIC not in roles or Role.SENSITIVE not in roles:
            raise SchemaError(
                "Schema needs at least one public and one sensitive attribute"
            )

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def public_indices(self) -> list[int]:
        return [i for i, a in enumerate(self.attributes) if a.role is Role.PUBLIC]

    @property
    def sensitive_indices(self) -> list[int]:
        return [i for i, a in enumerate(self.attributes) if a.role is Role.SENSITIVE]

    @property
    def public_names(self) -> list[str]:
        return [self.attributes[i].name for i in self.public_indices]

    @property
    def sensitive_names(self) -> list[str]:
        return [self.attributes[i].name for i in self.sensitive_indices]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingColumnError(f"Unknown attribute: {name}") from None


@dataclass(frozen=True)
class WeightedRecord:
    values: tuple[str, ...]
    count: int
    d: float


@dataclass(frozen=True)
class WeightedDataset:
    """Weighted records over a schema, with the true decision rule per record.

    Record order is the load order after duplicate merging; every later
    tie-break (anchors, allocation fill, worst fairness pair) follows it.
    """

    schema: AttributeSchema
    records: tuple[WeightedRecord, ...]

    def __post_init__(self) -> None:
        if not self.records or self.total <= 0:
            raise ZeroTotalError("Dataset has no population (total count is 0)")
        arity = len(self.schema.attributes)
        seen: set[tuple[str, ...]] = set()
        for rec in self.records:
            if len(rec.values) != arity:
                raise SchemaError(
                    f"Record {rec.values} has {len(rec.values)} values, schema has {arity}"
                )
            if rec.values in seen:
                raise ConflictingRuleError(f"Duplicate record {rec.values}")
            seen.add(rec.values)
            if rec.count < 1:
                raise BadCountError(f"Record {rec.values} has count {rec.count}")
            if not 0.0 <= rec.d <= 1.0:
                raise BadProbabilityError(f"Record {rec.values} has d={rec.d}")
        for i, attr in enumerate(self.schema.attributes):
            domain = set(attr.domain)
            for rec in self.records:
                if rec.values[i] not in domain:
                    raise SchemaError(
                        f"Value {rec.values[i]!r} not in domain of {attr.name}"
                    )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def total(self) -> int:
        return sum(r.count for r in self.records)

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.count for r in self.records], dtype=np.int64)

    @property
    def probabilities(self) -> np.ndarray:
        counts = self.counts
        return counts / counts.sum()

    @property
    def rules(self) -> np.ndarray:
        return np.array([r.d for r in self.records], dtype=float)

    def public_key(self, index: int) -> tuple[str, ...]:
        values = self.records[index].values
        return tuple(values[i] for i in self.schema.public_indices)

    def sensitive_key(self, index: int) -> tuple[str, ...]:
        values = self.records[index].values
        return tuple(values[i] for i in self.schema.sensitive_indices)

    def as_dict(self, index: int) -> dict[str, str]:
        return dict(zip(self.schema.names, self.records[index].values))

    def qid_dict(self, qid: tuple[str, ...]) -> dict[str, str]:
        return dict(zip(self.schema.public_names, qid))

    def qid_label(self, qid: tuple[str, ...]) -> str:
        return ",".join(f"{k}={v}" for k, v in self.qid_dict(qid).items())

    @classmethod
    def from_records(
        cls, schema: AttributeSchema, records: list[WeightedRecord]
    ) -> "WeightedDataset":
        """Build a dataset, merging duplicate value vectors with agreeing rules."""
        merged: dict[tuple[str, ...], WeightedRecord] = {}
        for rec in records:
            prior = merged.get(rec.values)
            if prior is None:
                merged[rec.values] = rec
                continue
            if abs(prior.d - rec.d) > RULE_MERGE_TOLERANCE:
                raise ConflictingRuleError(
                    f"Record {rec.values} appears with rules {prior.d} and {rec.d}"
                )
            merged[rec.values] = WeightedRecord(
                rec.values, prior.count + rec.count, prior.d
            )
        if len(merged) < len(records):
            logging.info(f"Merged {len(records) - len(merged)} duplicate records")
        return cls(schema=schema, records=tuple(merged.values()))

    @classmethod
    def from_frame(cls, df: pd.DataFrame, roles: dict[str, str]) -> "WeightedDataset":
        for column in RESERVED_COLUMNS:
            if column not in df.columns:
                raise MissingColumnError(f"Missing required column: {column}")
        for name in roles:
            if name not in df.columns:
                raise MissingColumnError(f"Configured attribute {name!r} not in data")
        attribute_columns = [c for c in df.columns if c not in RESERVED_COLUMNS]
        unassigned = [c for c in attribute_columns if c not in roles]
        if unassigned:
            raise SchemaError(f"Columns without a public/sensitive role: {unassigned}")

        if df.empty:
            raise ZeroTotalError("Dataset has no rows")

        counts = pd.to_numeric(df[COUNT_COLUMN], errors="coerce")
        bad_counts = counts.isna() | (counts < 1) | (counts != counts.round())
        if bad_counts.any():
            row = int(bad_counts.to_numpy().argmax())
            raise BadCountError(
                f"Row {row + 1}: count {df[COUNT_COLUMN].iloc[row]!r} is not a positive integer"
            )
        rules = pd.to_numeric(df[RULE_COLUMN], errors="coerce")
        bad_rules = rules.isna() | (rules < 0.0) | (rules > 1.0)
        if bad_rules.any():
            row = int(bad_rules.to_numpy().argmax())
            raise BadProbabilityError(
                f"Row {row + 1}: d={df[RULE_COLUMN].iloc[row]!r} is outside [0, 1]"
            )

        attributes = []
        for name in attribute_columns:
            domain = tuple(pd.unique(df[name].astype(str)))
            attributes.append(Attribute(name, domain, Role(roles[name])))
        schema = AttributeSchema(tuple(attributes))

        values = df[attribute_columns].astype(str).itertuples(index=False, name=None)
        records = [
            WeightedRecord(tuple(v), int(c), float(d))
            for v, c, d in zip(values, counts, rules)
        ]
        return cls.from_records(schema, records)

    @classmethod
    def from_file(
        cls, path: str, roles: dict[str, str] | Callable[[list[str]], dict[str, str]]
    ) -> "WeightedDataset":
        """Load a CSV; ``roles`` may be a callable mapping attribute columns to roles."""
        df = read_frame(path)
        if callable(roles):
            roles = roles([c for c in df.columns if c not in RESERVED_COLUMNS])
        return cls.from_frame(df, roles)


@dataclass(frozen=True, eq=False)
class QidGroup:
    """Records sharing one public-attribute vector, in dataset order.

    ``p`` holds unconditional probabilities P(x_k), so ``group_mass`` is the
    group's share of the whole dataset.
    """

    qid: tuple[str, ...]
    indices: np.ndarray
    p: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.indices) == len(self.p) == len(self.d)):
            raise ValueError("indices, p and d must have equal length")
        if len(self.p) == 0 or self.group_mass <= 0:
            raise ZeroTotalError(f"Group {self.qid} has no probability mass")

    @property
    def size(self) -> int:
        return len(self.p)

    @property
    def group_mass(self) -> float:
        return float(np.sum(self.p))

    @property
    def conditional(self) -> np.ndarray:
        return self.p / self.group_mass

    @property
    def members(self) -> list[tuple[int, float, float]]:
        return [
            (int(i), float(pk), float(dk))
            for i, pk, dk in zip(self.indices, self.p, self.d)
        ]

    @classmethod
    def from_arrays(cls, p, d, qid: tuple[str, ...] = ()) -> "QidGroup":
        p = np.asarray(p, dtype=float)
        return cls(
            qid=qid,
            indices=np.arange(len(p)),
            p=p,
            d=np.asarray(d, dtype=float),
        )


def read_frame(path: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ZeroTotalError(f"{path} is empty") from None
    df.columns = [c.strip() for c in df.columns]
    return df


def load_dataset(
    path: str, roles: dict[str, str] | Callable[[list[str]], dict[str, str]]
) -> WeightedDataset:
    ds = WeightedDataset.from_file(path, roles)
    logging.info(
        f"Loaded {len(ds)} records (population {ds.total:,}) from {path}"
    )
    return ds


def partition_by_qid(ds: WeightedDataset) -> list[QidGroup]:
    """Split the dataset into quasi-identifier groups, in order of first appearance."""
    buckets: dict[tuple[str, ...], list[int]] = {}
    for i in range(len(ds)):
        buckets.setdefault(ds.public_key(i), []).append(i)

    probabilities = ds.probabilities
    rules = ds.rules
    groups = []
    for qid, members in buckets.items():
        idx = np.array(members, dtype=np.int64)
        groups.append(QidGroup(qid=qid, indices=idx, p=probabilities[idx], d=rules[idx]))
    logging.debug(f"Partitioned {len(ds)} records into {len(groups)} QID groups")
    return groups
