"""Study-level adverse-event data: CSV ingestion, validation, classification."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from importlib import resources

LOGGER = logging.getLogger(__name__)

MANDATORY_COLUMNS = ("study", "n", "y", "cutoff")

# Tokens in the Y/cutoff cells that denote an unreported value. Anything
# else that fails integer parsing is an error, not a missing value.
_MISSING_TOKENS = {"", "na", "n/a"}


class StudyClass(Enum):
    OBSERVED = "observed"
    EXACT_ZERO = "exact_zero"
    CENSORED = "censored"


@dataclass(frozen=True)
class Violation:
    """One data-contract problem, reported as data rather than raised."""

    study_id: str
    field: str
    message: str
    severity: str = "error"  # "error" | "warning"

    def __str__(self) -> str:
        return f"[{self.severity}] {self.study_id}: {self.field}: {self.message}"


class DatasetError(ValueError):
    """Structural CSV problem; carries every violation found in one pass."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class StudyRecord:
    study_id: str
    n_treated: int
    observed_count: int | None = None
    cutoff: int | None = None


@dataclass(frozen=True)
class Dataset:
    records: tuple[StudyRecord, ...]
    source: str = "dataset"
    warnings: tuple[str, ...] = ()

    def class_counts(self) -> dict[StudyClass, int]:
        counts = {c: 0 for c in StudyClass}
        for record in self.records:
            counts[classify_study(record)] += 1
        return counts

    @property
    def n_studies(self) -> int:
        return len(self.records)


def classify_study(record: StudyRecord) -> StudyClass:
    """Map a record to Observed / ExactZero / Censored.

    ExactZero (count unreported, cutoff 0) pins the count to exactly 0 and is
    treated downstream as Observed(0); Censored leaves the count anywhere in
    [0, cutoff].
    """
    if record.observed_count is not None:
        return StudyClass.OBSERVED
    if record.cutoff == 0:
        return StudyClass.EXACT_ZERO
    return StudyClass.CENSORED


def effective_count(record: StudyRecord) -> int | None:
    """Known event count: Y when reported, 0 for ExactZero, None when censored."""
    cls = classify_study(record)
    if cls is StudyClass.OBSERVED:
        return record.observed_count
    if cls is StudyClass.EXACT_ZERO:
        return 0
    return None


def cutoff_from_percentage(n_treated: int, threshold: float) -> int:
    """Largest integer count not reported under a percent reporting rule.

    A count is reported only when it strictly exceeds n_treated*threshold%,
    so the cutoff is floor(n_treated*threshold/100). Decimal arithmetic keeps
    inputs like (459, 2) -> floor(9.18) = 9 immune to binary-float artifacts.
    """
    if n_treated < 1:
        raise ValueError(f"n_treated must be >= 1, got {n_treated}")
    if not 0 < threshold < 100:
        raise ValueError(f"threshold must lie in (0, 100), got {threshold}")
    exact = Decimal(n_treated) * Decimal(str(threshold)) / Decimal(100)
    return int(exact.to_integral_value(rounding="ROUND_FLOOR"))


def _parse_int_cell(
    raw: str, row_num: int, column: str, optional: bool
) -> tuple[int | None, Violation | None]:
    text = raw.strip()
    if optional and text.lower() in _MISSING_TOKENS:
        return None, None
    try:
        return int(text), None
    except ValueError:
        kind = "missing" if text == "" else f"non-integer value {text!r}"
        return None, Violation(f"row {row_num}", column, kind)


def parse_csv(content: bytes, source: str = "dataset") -> Dataset:
    """Parse UTF-8 CSV with header columns study, N, Y, cutoff (any order).

    Header matching is case-insensitive; extra columns are ignored with a
    recorded warning. Blank or NA cells in Y/cutoff denote unreported values.
    Raises DatasetError listing every structural problem (missing columns,
    non-integer cells, duplicate study ids, empty file) with row numbers.
    """
    try:
        text = content.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DatasetError([Violation("file", "encoding", f"not UTF-8: {exc}")]) from exc

    rows = list(csv.reader(io.StringIO(text)))
    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if not rows:
        raise DatasetError([Violation("file", "content", "empty file")])

    header = [cell.strip().lower() for cell in rows[0]]
    col_index: dict[str, int] = {}
    warnings: list[str] = []
    for idx, name in enumerate(header):
        if name in MANDATORY_COLUMNS and name not in col_index:
            col_index[name] = idx
        else:
            warnings.append(f"ignoring extra column {rows[0][idx].strip()!r}")

    violations = [
        Violation("header", name, "mandatory column missing")
        for name in MANDATORY_COLUMNS
        if name not in col_index
    ]
    if violations:
        raise DatasetError(violations)

    records: list[StudyRecord] = []
    seen_ids: set[str] = set()
    for row_offset, row in enumerate(rows[1:], start=2):
        cells = {
            name: row[idx] if idx < len(row) else ""
            for name, idx in col_index.items()
        }
        study_id = cells["study"].strip()
        if not study_id:
            violations.append(Violation(f"row {row_offset}", "study", "missing study id"))
        elif study_id in seen_ids:
            violations.append(
                Violation(f"row {row_offset}", "study", f"duplicate study id {study_id!r}")
            )
        seen_ids.add(study_id)

        n_val, bad = _parse_int_cell(cells["n"], row_offset, "N", optional=False)
        if bad:
            violations.append(bad)
        y_val, bad = _parse_int_cell(cells["y"], row_offset, "Y", optional=True)
        if bad:
            violations.append(bad)
        c_val, bad = _parse_int_cell(cells["cutoff"], row_offset, "cutoff", optional=True)
        if bad:
            violations.append(bad)

        if n_val is not None and study_id:
            records.append(
                StudyRecord(
                    study_id=study_id,
                    n_treated=n_val,
                    observed_count=y_val,
                    cutoff=c_val,
                )
            )

    if violations:
        raise DatasetError(violations)
    if not records:
        raise DatasetError([Violation("file", "content", "no data rows")])
    for warning in warnings:
        LOGGER.warning("%s: %s", source, warning)
    return Dataset(records=tuple(records), source=source, warnings=tuple(warnings))


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Check every record invariant; violations are returned, never raised.

    cutoff == n_treated on a censored study is legal but information-free,
    flagged with severity "warning"; everything else is an error.
    """
    violations: list[Violation] = []
    if not dataset.records:
        violations.append(Violation("dataset", "records", "at least one study required"))

    seen: set[str] = set()
    for record in dataset.records:
        sid = record.study_id
        if sid in seen:
            violations.append(Violation(sid, "study", "duplicate study id"))
        seen.add(sid)

        if record.n_treated < 1:
            violations.append(
                Violation(sid, "N", f"n_treated must be >= 1, got {record.n_treated}")
            )
            continue
        if record.observed_count is not None:
            if record.observed_count < 0:
                violations.append(Violation(sid, "Y", "observed_count is negative"))
            elif record.observed_count > record.n_treated:
                violations.append(
                    Violation(
                        sid,
                        "Y",
                        f"observed_count exceeds n_treated "
                        f"({record.observed_count} > {record.n_treated})",
                    )
                )
        else:
            if record.cutoff is None:
                violations.append(Violation(sid, "cutoff", "censored study lacks cutoff"))
                continue
            if record.cutoff < 0:
                violations.append(Violation(sid, "cutoff", "cutoff is negative"))
            elif record.cutoff > record.n_treated:
                violations.append(
                    Violation(
                        sid,
                        "cutoff",
                        f"cutoff exceeds n_treated ({record.cutoff} > {record.n_treated})",
                    )
                )
            elif record.cutoff == record.n_treated:
                violations.append(
                    Violation(
                        sid,
                        "cutoff",
                        "cutoff equals n_treated; study carries no information",
                        severity="warning",
                    )
                )
    return violations


def to_csv(dataset: Dataset) -> str:
    """Serialize back to the canonical column order; reparsing round-trips."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["study", "N", "cutoff", "Y"])
    for record in dataset.records:
        writer.writerow(
            [
                record.study_id,
                record.n_treated,
                "" if record.cutoff is None else record.cutoff,
                "" if record.observed_count is None else record.observed_count,
            ]
        )
    return buffer.getvalue()


def load_sample_csv() -> bytes:
    """Bundled Atezolizumab grade 3-5 pneumonitis dataset (15 studies)."""
    return resources.files("magec.data").joinpath("sample.csv").read_bytes()


def load_sample_dataset() -> Dataset:
    return parse_csv(load_sample_csv(), source="sample.csv")
