"""Joining per-pattern scores with judgment tallies and running the
correlation + mediation report.

Inputs are the scores CSV (pattern_hex, complexity_bits,
natural_randomness) and the aggregates CSV exported by the experiment
service; the joined analysis rows, pairwise correlations, mediation
report, and scatter panels are the outputs the paper-style figure
reduces to.
"""

from __future__ import annotations

from dataclasses import dataclass

from scenestat.stats import (
    JudgmentAggregate,
    MediationReport,
    PearsonResult,
    mediation,
    ols,
    pearson,
    subjective_randomness,
)


@dataclass(frozen=True)
class ScoreRow:
    pattern_hex: str
    complexity_bits: float
    natural_randomness: float


@dataclass(frozen=True)
class AnalysisRow:
    pattern_hex: str
    complexity_bits: float
    natural_randomness: float
    n_random: int
    n_total: int

    @property
    def subjective(self) -> float:
        return subjective_randomness(
            JudgmentAggregate(self.pattern_hex, self.n_random, self.n_total)
        )


@dataclass
class AnalysisResult:
    rows: list[AnalysisRow]
    correlations: dict[str, PearsonResult]
    report: MediationReport
    adjusted_r_squared: float

    def report_dict(self) -> dict:
        out = self.report.to_dict()
        out["adjusted_r2"] = self.adjusted_r_squared
        return out


PAIRS = (
    "complexity_vs_natural",
    "complexity_vs_subjective",
    "natural_vs_subjective",
)


def scores_to_csv(rows: list[ScoreRow], meta: dict | None = None) -> str:
    lines = []
    if meta:
        lines.append("# " + " ".join(f"{k}={v}" for k, v in meta.items()))
    lines.append("pattern_hex,complexity_bits,natural_randomness")
    for row in rows:
        lines.append(
            f"{row.pattern_hex},{row.complexity_bits:.12g},{row.natural_randomness:.12g}"
        )
    return "\n".join(lines) + "\n"


def scores_from_csv(text: str) -> list[ScoreRow]:
    rows = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != "pattern_hex,complexity_bits,natural_randomness":
                raise ValueError(f"line {lineno}: unexpected scores header")
            header_seen = True
            continue
        hex_part, complexity, natural = line.split(",")
        rows.append(ScoreRow(hex_part, float(complexity), float(natural)))
    return rows


def join_rows(
    scores: list[ScoreRow], aggregates: list[JudgmentAggregate]
) -> list[AnalysisRow]:
    """Inner join on pattern, keeping aggregate (set) order.

    Aggregates without a score row are an error; patterns only have
    judgments because they were sampled from scored corpus patterns.
    """
    by_pattern = {row.pattern_hex: row for row in scores}
    missing = [a.pattern_hex for a in aggregates if a.pattern_hex not in by_pattern]
    if missing:
        raise ValueError(
            f"{len(missing)} judged patterns have no score row: "
            + ", ".join(missing[:8])
            + ("..." if len(missing) > 8 else "")
        )
    unjudged = [a.pattern_hex for a in aggregates if a.n_total < 1]
    if unjudged:
        raise ValueError(
            f"{len(unjudged)} patterns have no judgments (no completed sessions?)"
        )
    return [
        AnalysisRow(
            pattern_hex=a.pattern_hex,
            complexity_bits=by_pattern[a.pattern_hex].complexity_bits,
            natural_randomness=by_pattern[a.pattern_hex].natural_randomness,
            n_random=a.n_random,
            n_total=a.n_total,
        )
        for a in aggregates
    ]


def analysis_rows_to_csv(rows: list[AnalysisRow]) -> str:
    lines = ["pattern_hex,complexity_bits,natural_randomness,n_random,n_total"]
    for row in rows:
        lines.append(
            f"{row.pattern_hex},{row.complexity_bits:.12g},"
            f"{row.natural_randomness:.12g},{row.n_random},{row.n_total}"
        )
    return "\n".join(lines) + "\n"


def analysis_rows_from_csv(text: str) -> list[AnalysisRow]:
    rows = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            continue
        hex_part, complexity, natural, n_random, n_total = line.split(",")
        rows.append(
            AnalysisRow(hex_part, float(complexity), float(natural), int(n_random), int(n_total))
        )
    return rows


def analyze(rows: list[AnalysisRow]) -> AnalysisResult:
    """Correlations, two-predictor fit, and the mediation decomposition.

    Predictor = complexity, mediator = natural randomness, outcome =
    subjective randomness.
    """
    if len(rows) < 4:
        raise ValueError(f"need at least 4 joined patterns, got {len(rows)}")
    complexity = [r.complexity_bits for r in rows]
    natural = [r.natural_randomness for r in rows]
    subjective = [r.subjective for r in rows]
    correlations = {
        "complexity_vs_natural": pearson(complexity, natural),
        "complexity_vs_subjective": pearson(complexity, subjective),
        "natural_vs_subjective": pearson(natural, subjective),
    }
    report = mediation(complexity, natural, subjective)
    fit = ols(subjective, [complexity, natural], names=("complexity", "natural"))
    return AnalysisResult(
        rows=rows,
        correlations=correlations,
        report=report,
        adjusted_r_squared=fit.adjusted_r_squared,
    )


def correlations_to_csv(correlations: dict[str, PearsonResult]) -> str:
    lines = ["pair,r,t,p,n"]
    for pair in PAIRS:
        res = correlations[pair]
        lines.append(f"{pair},{res.r:.12g},{res.t:.12g},{res.p:.12g},{res.n}")
    return "\n".join(lines) + "\n"
