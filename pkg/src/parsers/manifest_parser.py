"""
Corpus manifests: UTF-8 text, one utterance per line, tab-separated
`utterance_id feature_path speaker_id gender label_path`, with `-` for a
missing label path. Relative paths resolve against the manifest's directory.
"""

import logging
from pathlib import Path
from typing import List

from pydantic import ValidationError

from ..errors import MissingInputError, ParseError
from ..models.schema import ManifestRecord

logger = logging.getLogger(__name__)

NO_LABELS = "-"


class ManifestParser:
    """Parses manifest files into ManifestRecord lists."""

    def parse_file(self, path: str) -> List[ManifestRecord]:
        file_path = Path(path)
        if not file_path.is_file():
            raise MissingInputError(f"Manifest not found: {file_path}")
        return self.parse_text(file_path.read_text(encoding="utf-8"), str(file_path))

    def parse_text(self, text: str, source: str = "<manifest>") -> List[ManifestRecord]:
        records: List[ManifestRecord] = []
        seen = {}
        for number, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 5:
                raise ParseError(f"{source} line {number}: expected 5 tab-separated fields, got {len(fields)}")
            utterance_id, feature_path, speaker_id, gender, label_path = (f.strip() for f in fields)
            if utterance_id in seen:
                raise ParseError(
                    f"{source} line {number}: duplicate utterance id {utterance_id} (first on line {seen[utterance_id]})"
                )
            seen[utterance_id] = number
            try:
                records.append(
                    ManifestRecord(
                        utterance_id=utterance_id,
                        feature_path=feature_path,
                        speaker_id=speaker_id,
                        gender=gender,
                        label_path=None if label_path == NO_LABELS else label_path,
                    )
                )
            except ValidationError as exc:
                raise ParseError(f"{source} line {number}: {exc.errors()[0]['msg']}") from exc
        return records


def format_manifest(records: List[ManifestRecord]) -> str:
    return "".join(
        "\t".join(
            [r.utterance_id, r.feature_path, r.speaker_id, r.gender.value, r.label_path or NO_LABELS]
        )
        + "\n"
        for r in records
    )
