"""Dataset manifests and reverberant-recording synthesis."""

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from .audio import AudioBuffer, convolve_rir, read_wav, resample, write_wav
from .errors import ManifestInvalidError
from .synth import parse_rir_spec

CONDITIONS = ("near", "far")
SPLITS = ("train", "test")
MANIFEST_FIELDS = ["speech_path", "rir", "room", "condition", "split"]


@dataclass(frozen=True)
class ManifestEntry:
    speech_path: str
    rir: str  # path to a WAV or an inline "synth:..." spec
    room: str
    condition: str
    split: str


@dataclass
class DatasetManifest:
    entries: list
    sample_rate_hz: int = 16000

    def validate(self) -> None:
        """Enforce split hygiene; raises naming the first offending entry."""
        if not self.entries:
            raise ManifestInvalidError("manifest invalid: no entries")
        split_of = {}
        room_of = {}
        for entry in self.entries:
            if entry.condition not in CONDITIONS:
                raise ManifestInvalidError(
                    f"manifest invalid: entry {entry.speech_path}: "
                    f"condition {entry.condition!r}"
                )
            if entry.split not in SPLITS:
                raise ManifestInvalidError(
                    f"manifest invalid: entry {entry.speech_path}: split {entry.split!r}"
                )
            prior_split = split_of.get(entry.speech_path)
            if prior_split is not None and prior_split != entry.split:
                raise ManifestInvalidError(
                    f"manifest invalid: entry {entry.speech_path}: "
                    "speech appears in both train and test"
                )
            split_of[entry.speech_path] = entry.split
            prior_room = room_of.get(entry.speech_path)
            if prior_room is not None and prior_room != entry.room:
                raise ManifestInvalidError(
                    f"manifest invalid: entry {entry.speech_path}: "
                    f"speech paired with rooms {prior_room!r} and {entry.room!r}"
                )
            room_of[entry.speech_path] = entry.room
        for split in SPLITS:
            per_room = Counter(e.room for e in self.entries if e.split == split)
            if per_room and len(set(per_room.values())) != 1:
                raise ManifestInvalidError(
                    f"manifest invalid: unbalanced rooms in {split} split: {dict(per_room)}"
                )

    def select(self, split: str, conditions) -> list:
        return [e for e in self.entries if e.split == split and e.condition in conditions]

    @property
    def rooms(self) -> list:
        return sorted({e.room for e in self.entries})


def save_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        for entry in manifest.entries:
            writer.writerow(
                {
                    "speech_path": entry.speech_path,
                    "rir": entry.rir,
                    "room": entry.room,
                    "condition": entry.condition,
                    "split": entry.split,
                }
            )


def load_manifest(path, sample_rate_hz: int = 16000) -> DatasetManifest:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_FIELDS:
            raise ManifestInvalidError(
                f"manifest invalid: header {reader.fieldnames} != {MANIFEST_FIELDS}"
            )
        for row in reader:
            entries.append(
                ManifestEntry(
                    speech_path=row["speech_path"],
                    rir=row["rir"],
                    room=row["room"],
                    condition=row["condition"],
                    split=row["split"],
                )
            )
    return DatasetManifest(entries=entries, sample_rate_hz=sample_rate_hz)


def recording_path(out_dir, entry: ManifestEntry) -> Path:
    stem = Path(entry.speech_path).stem
    return Path(out_dir) / entry.split / entry.room / f"{stem}_{entry.condition}.wav"


def _load_rir(entry: ManifestEntry, sample_rate_hz: int) -> AudioBuffer:
    if entry.rir.startswith("synth:"):
        return parse_rir_spec(entry.rir, sample_rate_hz)
    rir = read_wav(entry.rir)
    if rir.sample_rate_hz != sample_rate_hz:
        rir = resample(rir, sample_rate_hz)
    return rir


def synth_dataset(manifest: DatasetManifest, out_dir) -> dict:
    """Convolve every manifest entry and write the reverberant WAVs.

    The manifest is validated before any file is written. Returns a report
    with per-room/per-split counts and the list of written files.
    """
    manifest.validate()
    out_dir = Path(out_dir)
    rir_cache = {}
    written = []
    counts = defaultdict(int)
    for entry in manifest.entries:
        speech = read_wav(entry.speech_path)
        if speech.sample_rate_hz != manifest.sample_rate_hz:
            speech = resample(speech, manifest.sample_rate_hz)
        key = (entry.rir, entry.condition)
        if key not in rir_cache:
            rir_cache[key] = _load_rir(entry, manifest.sample_rate_hz)
        reverberant = convolve_rir(speech, rir_cache[key])
        target = recording_path(out_dir, entry)
        target.parent.mkdir(parents=True, exist_ok=True)
        write_wav(target, reverberant)
        written.append(str(target))
        counts[f"{entry.split}/{entry.room}"] += 1
    return {
        "files_written": len(written),
        "counts": dict(counts),
        "paths": written,
        "sample_rate_hz": manifest.sample_rate_hz,
    }
