import os
from pathlib import Path
from typing import Optional

from attrs import define, field

import common.constants as constants


def _output_dir_from_env() -> Optional[Path]:
    value = os.getenv(constants.OUTPUT_DIR_ENV)
    return Path(value) if value else None


@define(slots=True, frozen=True, kw_only=True)
class RunContext:
    command: str = field(
        default=constants.DEFAULT_COMMAND,
        metadata={"description": "CLI command being run (simulate, analyze, trace)"},
    )
    service: str = field(default=constants.SERVICE_NAME, init=False)
    output_dir: Optional[Path] = field(
        factory=_output_dir_from_env,
        converter=lambda value: Path(value) if value is not None else None,
    )

    @classmethod
    def resolve(cls, command: str, output_dir: Optional[str] = None) -> "RunContext":
        """Flag value wins over the environment variable."""
        if output_dir:
            return cls(command=command, output_dir=Path(output_dir))
        return cls(command=command)

    @property
    def writes_to_stdout(self) -> bool:
        return self.output_dir is None

    # ---------- naming ----------
    def build_report_name(
        self,
        extension: str,
        protocol: Optional[str] = None,
        adversary: Optional[str] = None,
        n: Optional[int] = None,
        m: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> str:
        """Build a report file name from whichever parts are known.

        Examples:
            - analyze: treebound-analyze.csv
            - simulate: treebound-simulate-tree-preask-n4-m4-seed42.json
        """
        parts = [self.service, self.command]
        if protocol:
            parts.append(protocol)
        if adversary:
            parts.append(adversary)
        if n is not None:
            parts.append(f"n{n}")
        if m is not None:
            parts.append(f"m{m}")
        if seed is not None:
            parts.append(f"seed{seed}")
        return f"{'-'.join(parts)}.{extension}".lower()

    def build_report_path(self, extension: str, **name_parts) -> Path:
        if self.output_dir is None:
            raise ValueError("No output directory configured, unable to build a report path")
        return self.output_dir / self.build_report_name(extension, **name_parts)

    def write_report(self, text: str, extension: str, **name_parts) -> Optional[Path]:
        """Write to the output directory when one is configured, else to stdout."""
        if self.output_dir is None:
            print(text, end="" if text.endswith("\n") else "\n")
            return None
        path = self.build_report_path(extension, **name_parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text if text.endswith("\n") else text + "\n")
        return path
