"""Run manifest written next to every command's outputs."""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from orthosplat import __version__


MANIFEST_FILE = 'manifest.json'
_CHUNK = 1 << 20


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open('rb') as handle:
        for chunk in iter(lambda: handle.read(_CHUNK), b''):
            digest.update(chunk)
    return digest.hexdigest()


def input_hashes(*paths) -> dict[str, str]:
    """SHA-256 per input file; directories contribute every file below them."""
    hashes = {}
    for path in paths:
        path = Path(path)
        if path.is_dir():
            for child in sorted(p for p in path.rglob('*') if p.is_file()):
                hashes[child.as_posix()] = file_sha256(child)
        elif path.is_file():
            hashes[path.as_posix()] = file_sha256(path)
    return hashes


def _plain(value):
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    timings: dict[str, float] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return _plain(asdict(self))

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return path

    @classmethod
    def read(cls, path) -> 'RunManifest':
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILE
        data = json.loads(path.read_text(encoding='utf-8'))
        return cls(**data)
