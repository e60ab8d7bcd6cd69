"""Configuration of dgevalctl, read from a TOML file."""

from pathlib import Path
from typing import Any, Optional, Union

import toml
import typer
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..config import EvaluationConfig, JudgeConfig
from ..constants import JudgeMode
from ..cost import ModelPrice

DEFAULT_CONFIG_FILE = "dgeval.toml"
ENVVAR_CONFIG_FILE = "DGEVALCTL_CONFIG"


class JudgeSettings(BaseModel):
    """Judge parameters allowed in the configuration file, the credential is not one of them."""

    model_config = ConfigDict(extra="forbid")
    endpoint: Optional[str] = None
    model: Optional[str] = None
    temperature: Optional[float] = None
    max_tokens: Optional[int] = None
    mode: Optional[JudgeMode] = None
    fixtures_directory: Optional[Path] = None
    max_concurrent_requests: Optional[int] = None
    max_attempts: Optional[int] = None
    retry_delay: Optional[float] = None
    timeout: Optional[int] = None

    @model_validator(mode="before")
    @classmethod
    def reject_credentials(cls, values: Any) -> Any:
        if isinstance(values, dict) and "api_key" in values:
            raise ValueError("api_key can't be set in the configuration file, use the DGEVAL_JUDGE_API_KEY variable")
        return values

    def to_config(self, **overrides: Any) -> JudgeConfig:
        data = {**self.model_dump(exclude_none=True), **{key: value for key, value in overrides.items() if value}}
        return JudgeConfig(**data)


class Settings(BaseSettings):
    """Main Settings Class for the project."""

    model_config = SettingsConfigDict(env_prefix="DGEVALCTL_", extra="forbid")
    judge: JudgeSettings = Field(default_factory=JudgeSettings)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    pricing: dict[str, ModelPrice] = Field(default_factory=dict)
    reference_model: str = Field(default="gpt-4", description="Model the relative costs are normalized to")
    persona: Optional[Path] = Field(default=None, description="Persona file used by the stitch command")


class ConfiguredSettings:
    def __init__(self) -> None:
        self._settings: Optional[Settings] = None

    @property
    def active(self) -> Settings:
        if self._settings:
            return self._settings

        print("Configuration not properly loaded")
        raise typer.Abort()

    def load(self, config_file: Union[str, Path] = DEFAULT_CONFIG_FILE, config_data: Optional[dict] = None) -> None:
        """Load configuration from a TOML file, or from a dictionary passed as config_data."""

        if self._settings:
            return

        if config_data:
            self._settings = Settings(**config_data)
            return

        if not isinstance(config_file, Path):
            config_file = Path(config_file)

        if config_file.is_file():
            config_tmp = toml.loads(config_file.read_text(encoding="utf-8"))
            self._settings = Settings(**config_tmp)
            return

        self._settings = Settings()

    def load_and_exit(
        self, config_file: Union[str, Path] = DEFAULT_CONFIG_FILE, config_data: Optional[dict] = None
    ) -> None:
        """Calls load and prints every invalid setting before exiting with code 1 when validation fails."""

        try:
            self.load(config_file=config_file, config_data=config_data)
        except ValidationError as exc:
            print(f"Configuration not valid, found {len(exc.errors())} error(s)")
            for error in exc.errors():
                loc_str = [str(item) for item in error["loc"]]
                print(f"  {'/'.join(loc_str)} | {error['msg']} ({error['type']})")
            raise typer.Exit(1)

    def reset(self) -> None:
        self._settings = None


SETTINGS = ConfiguredSettings()
