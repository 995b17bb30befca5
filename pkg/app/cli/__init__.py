# CLI exports
from app.cli.errors import cli_errors, format_validation_error
from app.cli.options import apply_overrides, load_config, parse_int_list

__all__ = [
    "cli_errors",
    "format_validation_error",
    "apply_overrides",
    "load_config",
    "parse_int_list",
]
