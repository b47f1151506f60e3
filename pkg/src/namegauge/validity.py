"""Patient-level impairment derivation and the validity battery.

Each patient's predicted trial scores are averaged per metric; a mean at
or below 1 classifies the patient as impaired. The battery then contrasts
impaired vs unimpaired groups on each clinical/demographic variable:
continuous variables get a Shapiro-Wilk gate (pooled within-group-centered
residuals, normal at p >= 0.05) routing to Student's t or Mann-Whitney U;
categorical variables get Fisher's exact test on the 2x2 status table.
Variables with fewer than two members in either group are skipped with a
notice rather than tested.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import StatsError
from .stats import (
    TestResult,
    bonferroni,
    fisher_exact_2x2,
    mann_whitney_u,
    shapiro_wilk,
    t_test_two_sample,
)
from .storage import atomic_write

CONTINUOUS_VARIABLES = ("fluency", "ldl_cholesterol", "age")
CATEGORICAL_VARIABLES = ("previous_stroke", "english_second_language", "sex", "smoking")
ALL_VARIABLES = CONTINUOUS_VARIABLES + CATEGORICAL_VARIABLES

NORMALITY_ALPHA = 0.05
MIN_GROUP = 2

_BOOL_VALUES = {"true": True, "1": True, "yes": True,
                "false": False, "0": False, "no": False}


@dataclass(frozen=True)
class CovariateTable:
    """participant_id -> {variable: value}; missing values are absent keys."""

    rows: dict

    def value(self, participant_id, variable):
        return self.rows.get(participant_id, {}).get(variable)


def load_covariates(path) -> CovariateTable:
    """CSV with a participant_id column; empty cells mean missing."""
    rows = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "participant_id" not in reader.fieldnames:
            raise StatsError("covariates CSV needs a participant_id column")
        unknown = [
            f for f in reader.fieldnames
            if f != "participant_id" and f not in ALL_VARIABLES
        ]
        if unknown:
            raise StatsError(f"unknown covariate columns: {unknown}")
        for record in reader:
            pid = record["participant_id"]
            if pid in rows:
                raise StatsError(f"duplicate participant_id {pid!r} in covariates")
            values = {}
            for variable in ALL_VARIABLES:
                raw = (record.get(variable) or "").strip()
                if not raw:
                    continue
                if variable in CONTINUOUS_VARIABLES:
                    try:
                        value = float(raw)
                    except ValueError:
                        raise StatsError(
                            f"participant {pid!r}: {variable}={raw!r} is not numeric"
                        )
                    if not np.isfinite(value):
                        raise StatsError(
                            f"participant {pid!r}: {variable} must be finite"
                        )
                    values[variable] = value
                elif variable == "sex":
                    values[variable] = raw
                else:
                    lowered = raw.lower()
                    if lowered not in _BOOL_VALUES:
                        raise StatsError(
                            f"participant {pid!r}: {variable}={raw!r} is not boolean"
                        )
                    values[variable] = _BOOL_VALUES[lowered]
            rows[pid] = values
    return CovariateTable(rows=rows)


@dataclass(frozen=True)
class ImpairmentStatus:
    """Per-participant mean predicted score and impaired/unimpaired label."""

    metric: str
    means: dict
    status: dict

    def group(self, label: str) -> list:
        return sorted(p for p, s in self.status.items() if s == label)


def derive_patient_status(predictions: dict, metric: str) -> ImpairmentStatus:
    """Average each patient's predicted 0/1/2 scores for one metric.

    predictions maps participant_id -> iterable of predicted scores.
    mean <= 1 classifies the patient as impaired (boundary inclusive).
    """
    means = {}
    status = {}
    for pid, scores in predictions.items():
        scores = list(scores)
        if not scores:
            raise StatsError(f"patient {pid!r} has zero scored trials")
        for s in scores:
            if s not in (0, 1, 2):
                raise StatsError(f"patient {pid!r}: score {s!r} outside {{0,1,2}}")
        mean = sum(scores) / len(scores)
        means[pid] = mean
        status[pid] = "impaired" if mean <= 1.0 else "unimpaired"
    return ImpairmentStatus(metric=metric, means=means, status=status)


@dataclass(frozen=True)
class BatteryRow:
    variable: str
    impaired_n: int
    unimpaired_n: int
    test: str = ""
    statistic: float = float("nan")
    df: float = None
    p_raw: float = None
    p_adjusted: float = None
    direction: str = ""
    skipped_reason: str = ""


def _route_continuous(impaired, unimpaired) -> TestResult:
    """Normality-gated choice between Student's t and Mann-Whitney U."""
    impaired = np.asarray(impaired, dtype=np.float64)
    unimpaired = np.asarray(unimpaired, dtype=np.float64)
    residuals = np.concatenate(
        [impaired - impaired.mean(), unimpaired - unimpaired.mean()]
    )
    try:
        gate = shapiro_wilk(residuals)
        normal = gate.p_value >= NORMALITY_ALPHA
    except StatsError:
        normal = False  # degenerate residuals: fall through to the rank test
    if normal:
        try:
            return t_test_two_sample(impaired, unimpaired)
        except StatsError:
            pass
    return mann_whitney_u(impaired, unimpaired)


def validity_analysis(
    status: ImpairmentStatus, covariates: CovariateTable, variables=ALL_VARIABLES
) -> list:
    """Battery of group contrasts; returns one BatteryRow per variable.

    Bonferroni adjustment uses the number of tests actually run in this
    invocation. Patients missing a variable drop out of that variable
    only (pairwise deletion).
    """
    impaired_ids = status.group("impaired")
    unimpaired_ids = status.group("unimpaired")
    if not impaired_ids or not unimpaired_ids:
        raise StatsError(
            f"need both status groups, got {len(impaired_ids)} impaired and "
            f"{len(unimpaired_ids)} unimpaired"
        )
    rows = []
    for variable in variables:
        imp = [
            covariates.value(p, variable)
            for p in impaired_ids
            if covariates.value(p, variable) is not None
        ]
        unimp = [
            covariates.value(p, variable)
            for p in unimpaired_ids
            if covariates.value(p, variable) is not None
        ]
        if len(imp) < MIN_GROUP or len(unimp) < MIN_GROUP:
            rows.append(
                BatteryRow(
                    variable=variable,
                    impaired_n=len(imp),
                    unimpaired_n=len(unimp),
                    skipped_reason=(
                        f"group below {MIN_GROUP} members "
                        f"(impaired {len(imp)}, unimpaired {len(unimp)})"
                    ),
                )
            )
            continue
        if variable in CONTINUOUS_VARIABLES:
            result = _route_continuous(imp, unimp)
            diff = float(np.mean(imp)) - float(np.mean(unimp))
            direction = "impaired_lower" if diff < 0 else (
                "impaired_higher" if diff > 0 else "equal"
            )
        else:
            levels = sorted({str(v) for v in imp + unimp})
            if len(levels) != 2:
                rows.append(
                    BatteryRow(
                        variable=variable,
                        impaired_n=len(imp),
                        unimpaired_n=len(unimp),
                        skipped_reason=(
                            f"needs exactly 2 levels for the 2x2 exact test, "
                            f"got {levels}"
                        ),
                    )
                )
                continue
            # rows: impaired / unimpaired; columns: the two levels
            table = [
                [sum(1 for v in imp if str(v) == level) for level in levels],
                [sum(1 for v in unimp if str(v) == level) for level in levels],
            ]
            try:
                result = fisher_exact_2x2(table)
            except StatsError as exc:
                rows.append(
                    BatteryRow(
                        variable=variable,
                        impaired_n=len(imp),
                        unimpaired_n=len(unimp),
                        skipped_reason=str(exc),
                    )
                )
                continue
            share_imp = table[0][1] / len(imp)
            share_unimp = table[1][1] / len(unimp)
            direction = (
                f"impaired_more_{levels[1]}"
                if share_imp > share_unimp
                else (f"impaired_less_{levels[1]}" if share_imp < share_unimp else "equal")
            )
        rows.append(
            BatteryRow(
                variable=variable,
                impaired_n=len(imp),
                unimpaired_n=len(unimp),
                test=result.method,
                statistic=result.statistic,
                df=result.df,
                p_raw=result.p_value if result.p_raw is None else result.p_raw,
                direction=direction,
            )
        )
    n_tests = sum(1 for r in rows if not r.skipped_reason)
    adjusted = []
    for row in rows:
        if row.skipped_reason:
            adjusted.append(row)
        else:
            adjusted.append(
                BatteryRow(
                    variable=row.variable,
                    impaired_n=row.impaired_n,
                    unimpaired_n=row.unimpaired_n,
                    test=row.test,
                    statistic=row.statistic,
                    df=row.df,
                    p_raw=row.p_raw,
                    p_adjusted=bonferroni(row.p_raw, max(1, n_tests)),
                    direction=row.direction,
                )
            )
    return adjusted


def write_battery_report(rows, path) -> None:
    """TSV report; the columns behind the per-variable comparison figure."""
    columns = (
        "variable", "group_impaired_n", "group_unimpaired_n", "test",
        "statistic", "df", "p_raw", "p_adjusted", "skipped_reason", "direction",
    )
    with atomic_write(path, encoding="utf-8") as handle:
        handle.write("\t".join(columns) + "\n")
        for row in sorted(rows, key=lambda r: r.variable):
            handle.write(
                "\t".join(
                    [
                        row.variable,
                        str(row.impaired_n),
                        str(row.unimpaired_n),
                        row.test,
                        "" if row.statistic != row.statistic else f"{row.statistic:.6g}",
                        "" if row.df is None else f"{row.df:g}",
                        "" if row.p_raw is None else f"{row.p_raw:.6g}",
                        "" if row.p_adjusted is None else f"{row.p_adjusted:.6g}",
                        row.skipped_reason,
                        row.direction,
                    ]
                )
                + "\n"
            )
