import io
from typing import Any

from ruamel.yaml import YAML


def load_yaml(text: str) -> Any:
    yaml = YAML(typ="safe", pure=True)
    return yaml.load(text)


def dump_yaml(data: Any) -> str:
    yaml = YAML()
    yaml.default_flow_style = None
    stream = io.StringIO()
    yaml.dump(data, stream)
    return stream.getvalue()
