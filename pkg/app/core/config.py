from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    """Process settings"""
    
    # App Configuration
    APP_NAME: str = "SSC-MMD"
    APP_ENV: str = "development"
    DEBUG: bool = False
    
    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: str = ""  # empty disables the file sink
    LOG_ROTATION: str = "10 MB"
    LOG_RETENTION: str = "7 days"
    
    # Runs
    RUNS_DIR: str = "runs"
    
    # Gradient checking
    GRADCHECK_SEEDS: int = 20
    GRADCHECK_TOLERANCE: float = 1e-4
    GRADCHECK_STEP: float = 1e-5
    
    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


settings = get_settings()
