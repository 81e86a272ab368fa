"""Run manifest: provenance for every pipeline invocation.

Records the config hash, tool version and a digest of each stage's
input and output files.  Identical config and inputs must yield
identical output digests; wall-clock fields are informational and
excluded from determinism comparisons.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union


class OutputDirLocked(RuntimeError):
    pass


def file_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StageRecord:
    name: str
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    seconds: float = 0.0
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seconds": self.seconds,
            "seed": self.seed,
        }


@dataclass
class RunManifest:
    config_hash: str
    version: str
    stages: List[StageRecord] = field(default_factory=list)

    def digests(self) -> dict:
        """The determinism-relevant view: config hash plus per-stage
        input/output digests, no timings."""
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "stages": [
                {"name": s.name, "inputs": s.inputs, "outputs": s.outputs, "seed": s.seed}
                for s in self.stages
            ],
        }

    def write(self, path: Union[str, Path]) -> None:
        payload = {
            "config_hash": self.config_hash,
            "version": self.version,
            "stages": [s.to_json() for s in self.stages],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        manifest = cls(config_hash=obj["config_hash"], version=obj["version"])
        for s in obj["stages"]:
            manifest.stages.append(
                StageRecord(
                    name=s["name"],
                    inputs=s["inputs"],
                    outputs=s["outputs"],
                    seconds=s["seconds"],
                    seed=s["seed"],
                )
            )
        return manifest


@contextmanager
def output_lock(out_dir: Union[str, Path]):
    """One process owns the output directory at a time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".finvuln.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputDirLocked(f"output directory locked by another run: {lock}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            lock.unlink()
        except FileNotFoundError:
            pass
