"""Check records and deterministic report rendering (text and machine)."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckRecord:
    suite: str
    check: str
    samples: int
    max_error: float
    tolerance: float
    passed: bool
    worst_point: tuple[float, ...] = ()
    detail: str = ""


@dataclass
class Report:
    records: list[CheckRecord] = field(default_factory=list)
    seed: int | None = None
    runtime: float | None = None

    def add(self, record: CheckRecord) -> None:
        self.records.append(record)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def render_text(self) -> str:
        lines = []
        for r in self.records:
            status = "PASS" if r.passed else "FAIL"
            line = (
                f"[{status}] {r.suite}/{r.check}: samples={r.samples} "
                f"max_error={r.max_error:.6e} tolerance={r.tolerance:.1e}"
            )
            if not r.passed and r.worst_point:
                line += " worst_point=(" + ", ".join(f"{v:.12g}" for v in r.worst_point) + ")"
            if r.detail:
                line += f" [{r.detail}]"
            lines.append(line)
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"overall: {verdict} ({len(self.records)} checks)")
        if self.seed is not None:
            lines.append(f"seed: {self.seed}")
        if self.runtime is not None:
            lines.append(f"runtime_seconds: {self.runtime:.3f}")
        return "\n".join(lines)

    def render_machine(self) -> str:
        """One tab-separated record per check, fixed field order, 17 sig digits.

        Excludes the runtime field so identical inputs give byte-identical
        bodies."""
        lines = ["suite\tcheck\tsamples\tmax_error\ttolerance\tpass\tworst_point"]
        for r in self.records:
            wp = ";".join(format(v, ".17g") for v in r.worst_point)
            lines.append(
                "\t".join(
                    (
                        r.suite,
                        r.check,
                        str(r.samples),
                        format(r.max_error, ".17g"),
                        format(r.tolerance, ".17g"),
                        "true" if r.passed else "false",
                        wp,
                    )
                )
            )
        if self.seed is not None:
            lines.append(f"# seed {self.seed}")
        return "\n".join(lines) + "\n"
