"""
Esquemas JSON de los reportes (pydantic). Todos llevan schema = "netstab-report/1".
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = "netstab-report/1"


class _Report(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(default=SCHEMA_VERSION, alias="schema")

    def to_json(self):
        return self.model_dump_json(indent=2, by_alias=True)


class StabilityReportModel(_Report):
    kind: Literal["stability"] = "stability"
    network: str
    indices: list[str]
    matrix: list[list[float]]
    rho: float
    verdict: Literal["stable", "inconclusive"]
    boundary: bool = False
    provenance: dict[str, str] = Field(default_factory=dict)
    cohen_grossberg_bound: float | None = None


class StructuralSetModel(BaseModel):
    set: list[str]
    complete: bool
    basic: bool
    branches: dict[str, list[list[str]]]
    admissible: list[list[str]]


class StructuralSetsReportModel(_Report):
    kind: Literal["structural-sets"] = "structural-sets"
    network: str
    sets: list[StructuralSetModel]


class AttractionVerdictModel(_Report):
    kind: Literal["attraction"] = "attraction"
    network: str
    converged: bool
    witness: list[float] | None = None
    final_diameter: float
    iterations_used: int
    trials: int
    seed: int
    tol: float


class ComparisonModel(_Report):
    kind: Literal["comparison"] = "comparison"
    network: str
    structural_set: list[str] = Field(default_factory=list)
    reports: dict[str, StabilityReportModel]


class JacobianModel(_Report):
    kind: Literal["jacobian"] = "jacobian"
    network: str
    fixed_point: list[float]
    indices: list[str]
    jacobian: list[list[float]]
    rho: float


class RegressionCheckModel(BaseModel):
    name: str
    expected: float
    observed: float
    passed: bool


class RegressionReportModel(_Report):
    kind: Literal["paper-regressions"] = "paper-regressions"
    checks: list[RegressionCheckModel]
    passed: bool


def stability_model(report):
    return StabilityReportModel(
        network=report.network,
        indices=list(report.labels),
        matrix=report.matrix.to_lists(),
        rho=report.rho,
        verdict=report.verdict,
        boundary=report.boundary,
        provenance=report.provenance,
        cohen_grossberg_bound=report.cohen_grossberg_bound,
    )


def structural_set_model(report):
    return StructuralSetModel(
        set=list(report.structural_set),
        complete=report.complete,
        basic=report.basic,
        branches={
            f"{source}->{target}": [list(branch.vertices) for branch in group]
            for (source, target), group in report.branches.items()
        },
        admissible=[list(branch.vertices) for branch in report.admissible],
    )


def structural_sets_model(network_name, reports):
    return StructuralSetsReportModel(
        network=network_name,
        sets=[structural_set_model(report) for report in reports],
    )


def attraction_model(network_name, verdict):
    return AttractionVerdictModel(
        network=network_name,
        converged=verdict.converged,
        witness=list(verdict.witness) if verdict.witness is not None else None,
        final_diameter=verdict.final_diameter,
        iterations_used=verdict.iterations_used,
        trials=verdict.trials,
        seed=verdict.seed,
        tol=verdict.tol,
    )


def comparison_model(network_name, reports, structural_set=()):
    return ComparisonModel(
        network=network_name,
        structural_set=list(structural_set),
        reports={key: stability_model(report) for key, report in reports.items()},
    )


def regressions_model(checks):
    models = [
        RegressionCheckModel(name=check.name, expected=check.expected, observed=check.observed, passed=check.passed)
        for check in checks
    ]
    return RegressionReportModel(checks=models, passed=all(model.passed for model in models))
