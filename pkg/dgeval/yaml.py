from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ValidationError

from .exceptions import FileNotValidError
from .models import PersonaConfig

DEFAULT_PERSONA = Path(__file__).parent / "data" / "personas" / "bihar.yml"


class YamlFile(BaseModel):
    location: Path
    content: Optional[dict] = None
    valid: bool = True
    error_message: Optional[str] = None

    def load_content(self) -> None:
        try:
            self.content = yaml.safe_load(self.location.read_text(encoding="utf-8"))
        except yaml.YAMLError:
            self.error_message = "Invalid YAML/JSON file"
            self.valid = False
            return

        if not self.content:
            self.error_message = "Empty YAML/JSON file"
            self.valid = False

    def validate_content(self) -> None:
        pass


class PersonaFile(YamlFile):
    _persona: Optional[PersonaConfig] = None

    @property
    def persona(self) -> PersonaConfig:
        if not self._persona:
            raise ValueError("_persona hasn't been initialized yet")
        return self._persona

    def validate_content(self) -> None:
        if not self.valid or not isinstance(self.content, dict):
            return
        try:
            self._persona = PersonaConfig(**self.content)
        except ValidationError as exc:
            self.error_message = f"Invalid persona: {exc.errors()[0]['msg']}"
            self.valid = False


def load_persona(path: Optional[Path] = None) -> PersonaConfig:
    """Read a persona from a YAML file, the Bihar extension officer by default."""
    persona_file = PersonaFile(location=path or DEFAULT_PERSONA)
    if not persona_file.location.is_file():
        raise FileNotValidError(name=str(persona_file.location), message=f"{persona_file.location} does not exist!")

    persona_file.load_content()
    persona_file.validate_content()
    if not persona_file.valid:
        raise FileNotValidError(name=str(persona_file.location), message=persona_file.error_message or "")
    return persona_file.persona
