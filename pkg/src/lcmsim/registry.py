"""Versioned, integrity-checked model package store.

Layout: one directory per model id holding `<version>.lcmp` container
files, plus a flat `index.txt` listing every entry's status. The index
is rewritten atomically (temp file then rename) so a crash never
leaves it half-written, and every fetch re-reads and re-verifies the
package file from disk rather than trusting memory.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import IntegrityError, NotFoundError, PairingError
from .kpi import InputDescriptor, descriptor_divergence
from .models import ModelKind, ModelPackage, verify_package

STATUSES = ("available", "active", "retired")


@dataclass(frozen=True)
class RegistryEntry:
    model_id: str
    version: int
    kind: str
    functionality_tag: str
    associated_id: str
    status: str
    stored_at_slot: int


def _entry_line(entry: RegistryEntry) -> str:
    fields = [
        f"model_id={entry.model_id}",
        f"version={entry.version}",
        f"kind={entry.kind}",
        f"functionality_tag={entry.functionality_tag}",
        f"associated_id={entry.associated_id}",
        f"status={entry.status}",
        f"stored_at_slot={entry.stored_at_slot}",
    ]
    return " ".join(fields)


def _parse_entry_line(line: str) -> RegistryEntry:
    fields = {}
    for token in line.split(" "):
        key, sep, value = token.partition("=")
        if not sep:
            raise IntegrityError(f"malformed index line: {line!r}")
        fields[key] = value
    try:
        return RegistryEntry(
            model_id=fields["model_id"],
            version=int(fields["version"]),
            kind=fields["kind"],
            functionality_tag=fields["functionality_tag"],
            associated_id=fields["associated_id"],
            status=fields["status"],
            stored_at_slot=int(fields["stored_at_slot"]),
        )
    except KeyError as exc:
        raise IntegrityError(f"index line missing field {exc}: {line!r}") from exc


def pairing_ids(associated_id: str) -> set[str]:
    """Reference ids an artifact was trained against.

    A single-source model carries one id; a multi-vendor decoder
    carries every source id joined with commas.
    """
    ids = {part for part in associated_id.split(",") if part}
    return ids


def verify_pairing(encoder_desc, decoder_desc) -> bool:
    """True iff both sides share at least one training reference."""
    enc = pairing_ids(getattr(encoder_desc, "associated_id", "") or "")
    dec = pairing_ids(getattr(decoder_desc, "associated_id", "") or "")
    if not enc or not dec:
        raise PairingError("associated_id missing on one side of the pairing check")
    return bool(enc & dec)


class ModelRegistry:
    """Single-writer package store with descriptor-keyed retrieval."""

    INDEX_NAME = "index.txt"

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._entries: dict[tuple[str, int], RegistryEntry] = {}
        self._load_index()

    # index persistence

    def _index_path(self) -> Path:
        return self.root / self.INDEX_NAME

    def _load_index(self) -> None:
        path = self._index_path()
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            entry = _parse_entry_line(line)
            self._entries[(entry.model_id, entry.version)] = entry

    def _write_index(self) -> None:
        lines = [_entry_line(self._entries[key]) for key in sorted(self._entries)]
        payload = "\n".join(lines) + ("\n" if lines else "")
        fd, tmp_name = tempfile.mkstemp(dir=self.root, prefix=".index-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, self._index_path())
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def package_path(self, model_id: str, version: int) -> Path:
        return self.root / model_id / f"{version}.lcmp"

    # core operations

    def store(self, package: ModelPackage, stored_at_slot: int = 0) -> tuple[str, int]:
        desc = package.descriptor
        key = (desc.model_id, desc.model_version)
        if key in self._entries:
            raise IntegrityError(f"{desc.model_id} v{desc.model_version} already stored")
        if not verify_package(package):
            raise IntegrityError(
                f"checksum mismatch storing {desc.model_id} v{desc.model_version}"
            )
        path = self.package_path(*key)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = package.to_bytes()
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".pkg-", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        self._entries[key] = RegistryEntry(
            model_id=desc.model_id,
            version=desc.model_version,
            kind=package.kind.value,
            functionality_tag=desc.functionality_tag,
            associated_id=desc.associated_id,
            status="available",
            stored_at_slot=stored_at_slot,
        )
        self._write_index()
        return key

    def _read_package(self, model_id: str, version: int) -> ModelPackage:
        path = self.package_path(model_id, version)
        if not path.exists():
            raise NotFoundError(f"package file missing for {model_id} v{version}")
        package = ModelPackage.from_bytes(path.read_bytes())
        if not verify_package(package):
            raise IntegrityError(f"checksum mismatch reading {model_id} v{version}")
        if package.descriptor.model_id != model_id or package.descriptor.model_version != version:
            raise IntegrityError(
                f"package file for {model_id} v{version} carries descriptor "
                f"{package.descriptor.model_id} v{package.descriptor.model_version}"
            )
        return package

    def fetch_by_id(self, model_id: str, version: int | None = None) -> ModelPackage:
        if version is None:
            versions = [
                v for (mid, v), entry in self._entries.items()
                if mid == model_id and entry.status != "retired"
            ]
            if not versions:
                raise NotFoundError(f"no stored versions of {model_id}")
            version = max(versions)
        if (model_id, version) not in self._entries:
            raise NotFoundError(f"{model_id} v{version} not in registry")
        return self._read_package(model_id, version)

    def fetch_by_functionality(self, functionality_tag: str) -> ModelPackage:
        candidates = [
            entry for entry in self._entries.values()
            if entry.functionality_tag == functionality_tag and entry.status != "retired"
        ]
        if not candidates:
            raise NotFoundError(f"no package with functionality tag {functionality_tag!r}")
        best = max(candidates, key=lambda e: (e.version, e.model_id))
        return self._read_package(best.model_id, best.version)

    def fetch_by_descriptor(
        self,
        query: InputDescriptor,
        kind: ModelKind | str,
        max_divergence: float,
    ) -> tuple[ModelPackage, float] | None:
        """Closest stored model of a kind, or None beyond max_divergence.

        Candidates are the available and active entries; ties go to the
        newest version, then the lexicographically lowest model id.
        """
        kind_value = kind.value if isinstance(kind, ModelKind) else str(kind)
        best: tuple[float, int, str, ModelPackage] | None = None
        for entry in sorted(self._entries.values(), key=lambda e: (e.model_id, e.version)):
            if entry.kind != kind_value or entry.status == "retired":
                continue
            package = self._read_package(entry.model_id, entry.version)
            div = descriptor_divergence(query, package.descriptor.input_descriptor)
            candidate = (div, -entry.version, entry.model_id, package)
            if best is None or candidate[:3] < best[:3]:
                best = candidate
        if best is None or best[0] > max_divergence:
            return None
        return best[3], best[0]

    # status management

    def _require(self, model_id: str, version: int) -> RegistryEntry:
        try:
            return self._entries[(model_id, version)]
        except KeyError:
            raise NotFoundError(f"{model_id} v{version} not in registry") from None

    def activate(self, model_id: str, version: int) -> None:
        """Mark one entry active, demoting any same-tag active entry."""
        entry = self._require(model_id, version)
        if entry.status == "retired":
            raise IntegrityError(f"cannot activate retired {model_id} v{version}")
        for key, other in self._entries.items():
            if other.status == "active" and other.functionality_tag == entry.functionality_tag:
                self._entries[key] = replace(other, status="available")
        self._entries[(model_id, version)] = replace(entry, status="active")
        self._write_index()

    def deactivate(self, model_id: str, version: int) -> None:
        entry = self._require(model_id, version)
        if entry.status == "active":
            self._entries[(model_id, version)] = replace(entry, status="available")
            self._write_index()

    def retire(self, model_id: str, version: int) -> None:
        entry = self._require(model_id, version)
        self._entries[(model_id, version)] = replace(entry, status="retired")
        self._write_index()

    def previous_version(self, model_id: str, current_version: int) -> int | None:
        versions = [
            v for (mid, v), entry in self._entries.items()
            if mid == model_id and v < current_version and entry.status != "retired"
        ]
        return max(versions) if versions else None

    def active_entry(self, functionality_tag: str) -> RegistryEntry | None:
        for entry in self._entries.values():
            if entry.status == "active" and entry.functionality_tag == functionality_tag:
                return entry
        return None

    def entries(self) -> list[RegistryEntry]:
        return [self._entries[key] for key in sorted(self._entries)]

    def gc(self) -> list[tuple[str, int]]:
        """Delete retired entries and their files; returns what was removed."""
        removed = []
        for key in sorted(self._entries):
            if self._entries[key].status != "retired":
                continue
            path = self.package_path(*key)
            if path.exists():
                path.unlink()
            if path.parent.exists() and not any(path.parent.iterdir()):
                path.parent.rmdir()
            del self._entries[key]
            removed.append(key)
        if removed:
            self._write_index()
        return removed

    def verify_all(self) -> list[tuple[str, int, str]]:
        """Integrity report over every entry: (id, version, 'ok' or error)."""
        report = []
        for key in sorted(self._entries):
            try:
                self._read_package(*key)
            except (IntegrityError, NotFoundError) as exc:
                report.append((key[0], key[1], str(exc)))
            else:
                report.append((key[0], key[1], "ok"))
        return report

    def descriptor_density(self, probes: list[InputDescriptor], kind: ModelKind | str) -> float:
        """Worst-case nearest-neighbor divergence over a probe grid.

        Diagnostic for how well the stored descriptors cover descriptor
        space; large values flag regions with no nearby model.
        """
        kind_value = kind.value if isinstance(kind, ModelKind) else str(kind)
        worst = 0.0
        for probe in probes:
            nearest = None
            for entry in self._entries.values():
                if entry.kind != kind_value or entry.status == "retired":
                    continue
                package = self._read_package(entry.model_id, entry.version)
                div = descriptor_divergence(probe, package.descriptor.input_descriptor)
                nearest = div if nearest is None else min(nearest, div)
            if nearest is None:
                raise NotFoundError(f"no stored models of kind {kind_value}")
            worst = max(worst, nearest)
        return worst
