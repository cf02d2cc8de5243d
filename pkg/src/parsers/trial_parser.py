"""
Trial lists: one trial per line, `utt_a utt_b label gender_pair` with label 1
for same-speaker trials and gender_pair FF or MM.
"""

from pathlib import Path

from pydantic import ValidationError

from ..errors import MissingInputError, ParseError
from ..models.schema import Trial, TrialList


class TrialListParser:
    """Parses trial list files."""

    def parse_file(self, path: str) -> TrialList:
        file_path = Path(path)
        if not file_path.is_file():
            raise MissingInputError(f"Trial list not found: {file_path}")
        trials = []
        for number, line in enumerate(file_path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 4 or fields[2] not in ("0", "1"):
                raise ParseError(f"{file_path} line {number}: expected 'utt_a utt_b 0|1 FF|MM'")
            try:
                trials.append(
                    Trial(
                        utterance_a=fields[0],
                        utterance_b=fields[1],
                        same_speaker=fields[2] == "1",
                        gender_pair=fields[3],
                    )
                )
            except ValidationError as exc:
                raise ParseError(f"{file_path} line {number}: {exc.errors()[0]['msg']}") from exc
        return TrialList(trials=trials)


def format_trials(trials: TrialList) -> str:
    return "".join(
        f"{t.utterance_a} {t.utterance_b} {int(t.same_speaker)} {t.gender_pair}\n" for t in trials.trials
    )
