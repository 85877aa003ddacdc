import json

from pydantic import ValidationError

from core.models.fit import FitReport
from core.storage.repositories.base_repository import BaseRepository
from utils.errors import FormatError

class ReportRepository(BaseRepository):
    """JSON fit reports tagged with the schema version."""

    def load(self) -> FitReport:
        try:
            data = json.loads(self.read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", offset=e.pos)
        if not isinstance(data, dict):
            raise FormatError("fit report must be a JSON object", offset=0)
        if "schema" not in data:
            raise FormatError("fit report has no schema tag")
        try:
            return FitReport.parse_obj(data)
        except ValidationError as e:
            error = e.errors()[0]
            raise FormatError(f"invalid fit report field {'.'.join(map(str, error['loc']))}: {error['msg']}")

    def save(self, report: FitReport):
        # json writes floats with repr, which round-trips exactly
        payload = report.dict(by_alias=True)
        self.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")
