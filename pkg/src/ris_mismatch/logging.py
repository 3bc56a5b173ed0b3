import logging, sys, json
from ris_mismatch.config import get_settings


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        base = {
            "level": record.levelname,
            "name": record.name,
            "msg": record.getMessage(),
        }
        if record.exc_info:
            base["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(base, ensure_ascii=False)


def configure(level: str | None = None):
    settings = get_settings()
    level_name = (level or settings.log_level).upper()
    handler = logging.StreamHandler(sys.stdout)
    if settings.log_json:
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    # force=True: CLI может вызываться повторно в одном процессе (CliRunner в тестах)
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), handlers=[handler], force=True)
