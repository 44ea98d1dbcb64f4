"""
Command line surface
"""
from midasme.cli.commands import fit_csv, run_diagnose, run_fit, run_simulate, write_metrics_csv
from midasme.cli.run_config import RunConfig, expand_grid, load_config, parse_config_text

__all__ = [
    "RunConfig",
    "expand_grid",
    "fit_csv",
    "load_config",
    "parse_config_text",
    "run_diagnose",
    "run_fit",
    "run_simulate",
    "write_metrics_csv",
]
