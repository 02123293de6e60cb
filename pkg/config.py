import os
from dotenv import load_dotenv
from typing import Optional

load_dotenv()

class Config:
    """Solver configuration loaded from environment variables."""

    # Unit system (hbar = 2m = 1 by default)
    HBAR: float = float(os.getenv("HBAR", "1.0"))
    MASS: float = float(os.getenv("MASS", "0.5"))

    # Numerical tolerances
    DEFAULT_TOL: float = float(os.getenv("DEFAULT_TOL", "1e-10"))
    POLE_GUARD: float = float(os.getenv("POLE_GUARD", "1e-8"))
    NODE_THRESHOLD: float = float(os.getenv("NODE_THRESHOLD", "1e-24"))

    # Truncation caps
    TRUNCATION_CAP: int = int(os.getenv("TRUNCATION_CAP", "200000"))
    SHELL_CAP: int = int(os.getenv("SHELL_CAP", "400"))
    QUAD_LIMIT: int = int(os.getenv("QUAD_LIMIT", "400"))
    CURVE_ORDER: int = int(os.getenv("CURVE_ORDER", "16"))

    # Output
    OUTPUT_DIR: str = os.getenv("SPECTRAL_OUTPUT_DIR", "results")
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    @classmethod
    def validate(cls) -> bool:
        """Validate that the numerical configuration is usable."""
        return not cls.get_invalid_config()

    @classmethod
    def get_invalid_config(cls) -> list[str]:
        """Get list of configuration keys holding unusable values."""
        invalid = []
        if cls.HBAR <= 0:
            invalid.append("HBAR")
        if cls.MASS <= 0:
            invalid.append("MASS")
        if not 0 < cls.DEFAULT_TOL < 1:
            invalid.append("DEFAULT_TOL")
        if not 0 < cls.POLE_GUARD < 1:
            invalid.append("POLE_GUARD")
        if cls.NODE_THRESHOLD < 0:
            invalid.append("NODE_THRESHOLD")
        if cls.TRUNCATION_CAP < 1:
            invalid.append("TRUNCATION_CAP")
        if cls.SHELL_CAP < 3:
            invalid.append("SHELL_CAP")
        if cls.QUAD_LIMIT < 50:
            invalid.append("QUAD_LIMIT")
        if cls.CURVE_ORDER < 4:
            invalid.append("CURVE_ORDER")
        return invalid

    @classmethod
    def output_dir(cls, override: Optional[str] = None) -> str:
        """Resolve the output directory, re-reading the environment variable."""
        if override:
            return override
        return os.getenv("SPECTRAL_OUTPUT_DIR", cls.OUTPUT_DIR)

# Note: validation is checked in main.py so the CLI can report bad settings
# as a configuration error (exit code 1) instead of failing mid-run
