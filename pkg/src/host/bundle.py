"""App bundles: one directory per f-unit.

    bundle/
        activations.cfg          # optional, bundle-level
        Groups/
            Groups.db
            wirings.cfg          # optional
            activations.cfg      # optional
            seed.sql             # optional
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from src.errors import IntegrationError
from src.schema.catalog import valid_name

logger = logging.getLogger(__name__)

WIRINGS_FILE = "wirings.cfg"
ACTIVATIONS_FILE = "activations.cfg"
SEED_FILE = "seed.sql"


@dataclass(frozen=True)
class FUnitDir:
    name: str
    root: Path

    @property
    def db_file(self) -> Path:
        return self.root / f"{self.name}.db"

    def optional(self, filename: str) -> Path | None:
        path = self.root / filename
        return path if path.is_file() else None

    @property
    def wirings_file(self) -> Path | None:
        return self.optional(WIRINGS_FILE)

    @property
    def activations_file(self) -> Path | None:
        return self.optional(ACTIVATIONS_FILE)

    @property
    def seed_file(self) -> Path | None:
        return self.optional(SEED_FILE)


@dataclass(frozen=True)
class AppBundle:
    root: Path
    funits: tuple[FUnitDir, ...] = field(default_factory=tuple)

    @property
    def activations_file(self) -> Path | None:
        path = self.root / ACTIVATIONS_FILE
        return path if path.is_file() else None

    def funit(self, name: str) -> FUnitDir:
        for funit in self.funits:
            if funit.name == name:
                return funit
        raise IntegrationError(f"bundle {self.root} has no f-unit '{name}'")


def load_bundle(root: str | Path) -> AppBundle:
    """
    Scans a bundle directory. Every sub-directory holding a `<dir>.db`
    file is an f-unit; directories without one are ignored.

    Raises:
        IntegrationError: if the root is missing or an f-unit directory
            name is not a valid component name.
    """
    root = Path(root)
    if not root.is_dir():
        raise IntegrationError(f"bundle directory {root} does not exist")
    funits = []
    for directory in sorted(p for p in root.iterdir() if p.is_dir()):
        funit = FUnitDir(directory.name, directory)
        if not funit.db_file.is_file():
            logger.debug(f"Skipping {directory}: no {funit.db_file.name}")
            continue
        if not valid_name(funit.name):
            raise IntegrationError(f"f-unit directory name '{funit.name}' is not a valid component name")
        funits.append(funit)
    if not funits:
        raise IntegrationError(f"bundle {root} contains no f-units")
    return AppBundle(root, tuple(funits))
