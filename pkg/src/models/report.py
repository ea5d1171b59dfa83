"""Report models written by the checks and the rsp-test driver."""

from __future__ import annotations

import enum

from pydantic import BaseModel, Field, field_validator


class Status(str, enum.Enum):
    PASSED = "pass"
    FAILED = "fail"
    SKIPPED = "skip"


class Verdict(BaseModel):
    """
    Outcome of one check.

    Attributes:
        check (str): Name of the check or pipeline stage.
        status (Status): pass, fail or skip.
        detail (str): Human-readable explanation, the first violation on failure.
        renamings (dict[str, str]): Renamings used to relate traces, by pair name.
        counterexample (dict | None): Replayable data attached to a failure.
    """

    check: str
    status: Status
    detail: str = ""
    renamings: dict[str, str] = Field(default_factory=dict)
    counterexample: dict | None = None

    @field_validator("check")
    @classmethod
    def validate_check(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("check name must not be empty")
        return v

    @property
    def ok(self) -> bool:
        return self.status is not Status.FAILED

    @classmethod
    def passed(cls, check: str, detail: str = "", **kwargs) -> Verdict:
        return cls(check=check, status=Status.PASSED, detail=detail, **kwargs)

    @classmethod
    def failed(cls, check: str, detail: str, **kwargs) -> Verdict:
        return cls(check=check, status=Status.FAILED, detail=detail, **kwargs)

    @classmethod
    def skipped(cls, check: str, detail: str, **kwargs) -> Verdict:
        return cls(check=check, status=Status.SKIPPED, detail=detail, **kwargs)


class RecompositionReport(BaseModel):
    verdict: Verdict
    steps: int = 0
    borders: int = 0
    naive_failures: int = 0
    pc_failures: int = 0

    @field_validator("steps", "borders", "naive_failures", "pc_failures")
    @classmethod
    def validate_count(cls, v: int) -> int:
        if v < 0:
            raise ValueError("counts must be non-negative")
        return v


class NaiveWitnessReport(BaseModel):
    """
    Regression witness for the turn-taking relation.

    Attributes:
        naive_failures (int): Monitored steps where the union relation fails.
        tt_failures (int): Monitored steps where the turn-taking relation fails.
        pc_accepts_mutation (bool): The pc-aware relation holds on a state with
                                    a mutated private program cell.
        tt_rejects_mutation (bool): The turn-taking relation fails on it.
    """

    verdict: Verdict
    naive_failures: int
    tt_failures: int
    pc_accepts_mutation: bool
    tt_rejects_mutation: bool


class PipelineReport(BaseModel):
    """
    Stage verdicts and artifacts of one robust-safety pipeline run.

    Attributes:
        verdict (Verdict): Overall verdict, labeled with the first failed stage.
        stages (list[Verdict]): One verdict per stage, in order.
        trace_lengths (dict[str, int]): Length of t1, t_backtr, t2, t12, t_qed.
        nowrite (dict[str, bool]): Safety property on t1 and t_qed, if requested.
    """

    verdict: Verdict
    stages: list[Verdict] = Field(default_factory=list)
    trace_lengths: dict[str, int] = Field(default_factory=dict)
    nowrite: dict[str, bool] = Field(default_factory=dict)

    @property
    def failed_stage(self) -> str | None:
        for stage in self.stages:
            if stage.status is Status.FAILED:
                return stage.check
        return None


class RspCase(BaseModel):
    seed: int
    status: Status
    failed_stage: str | None = None
    detail: str = ""


class RspTestReport(BaseModel):
    seed: int
    cases: int
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    results: list[RspCase] = Field(default_factory=list)

    @field_validator("cases")
    @classmethod
    def validate_cases(cls, v: int) -> int:
        if v < 0:
            raise ValueError("cases must be non-negative")
        return v

    @property
    def ok(self) -> bool:
        return self.failed == 0
