"""Run manifest: per-stage inputs, outputs, hashes, and resume decisions.

Each stage records a fingerprint of everything that determines its output
(input artifact hashes, config fragment, seeds, backend identity).  A
re-run skips a stage when the stored fingerprint matches and every output
file still hashes to its recorded value, so unchanged inputs never touch
a backend twice.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["file_hash", "Manifest"]


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def value_hash(doc) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()


class Manifest:
    def __init__(self, haiku_id: str, directory: Path, config_fingerprint: str = ""):
        self.haiku_id = haiku_id
        self.directory = Path(directory)
        self.config_fingerprint = config_fingerprint
        self.stages: dict = {}

    @property
    def path(self) -> Path:
        return self.directory / "manifest.json"

    # -- persistence ----------------------------------------------------

    def save(self) -> None:
        doc = {
            "haiku_id": self.haiku_id,
            "config_fingerprint": self.config_fingerprint,
            "stages": self.stages,
        }
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "Manifest":
        directory = Path(directory)
        doc = json.loads((directory / "manifest.json").read_text())
        m = cls(doc["haiku_id"], directory, doc.get("config_fingerprint", ""))
        m.stages = doc.get("stages", {})
        return m

    @classmethod
    def load_or_create(cls, haiku_id: str, directory, config_fingerprint: str) -> "Manifest":
        directory = Path(directory)
        if (directory / "manifest.json").exists():
            m = cls.load(directory)
            if m.haiku_id == haiku_id:
                m.config_fingerprint = config_fingerprint
                return m
        return cls(haiku_id, directory, config_fingerprint)

    # -- stage bookkeeping ------------------------------------------------

    def can_skip(self, stage: str, fingerprint: str) -> bool:
        rec = self.stages.get(stage)
        if not rec or rec.get("status") != "done" or rec.get("fingerprint") != fingerprint:
            return False
        for rel, digest in rec.get("output_hashes", {}).items():
            path = self.directory / rel
            if not path.exists() or file_hash(path) != digest:
                return False
        return True

    def record(self, stage: str, fingerprint: str, outputs: dict, backend: str = "", seed=None):
        self.stages[stage] = {
            "status": "done",
            "fingerprint": fingerprint,
            "outputs": {label: str(rel) for label, rel in outputs.items()},
            "output_hashes": {
                str(rel): file_hash(self.directory / rel) for rel in outputs.values()
            },
            "backend": backend,
            "seed": seed,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        self.save()

    def record_failure(self, stage: str, fingerprint: str, error: str):
        self.stages[stage] = {
            "status": "failed",
            "fingerprint": fingerprint,
            "error": error,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        self.save()

    def output(self, stage: str, label: str) -> Path:
        rec = self.stages.get(stage)
        if not rec or rec.get("status") != "done":
            raise KeyError(f"stage {stage!r} has no completed outputs")
        return self.directory / rec["outputs"][label]

    def verify(self) -> bool:
        """Every referenced artifact exists and matches its recorded hash."""
        for rec in self.stages.values():
            if rec.get("status") != "done":
                continue
            for rel, digest in rec.get("output_hashes", {}).items():
                path = self.directory / rel
                if not path.exists() or file_hash(path) != digest:
                    return False
        return True
