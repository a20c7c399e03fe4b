from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Unknown GENCONV_* / .env entries are ignored rather than rejected
    model_config = SettingsConfigDict(env_prefix="GENCONV_", env_file=".env", extra="ignore")

    # ---- Logging ----
    environment: str = "development"
    log_level: str = "INFO"
    log_dir: str = "logs"
    log_to_file: bool = True

    # ---- Execution ----
    threads: int = 1

    # ---- Visualization ----
    default_resolution: int = 51
    default_slices: int = 9


settings = Settings()
