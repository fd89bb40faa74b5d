"""
Configuration Manager
Handles loading and saving engine settings kept in a .env file
"""

import logging
import os
from typing import Any, Dict, Optional, Tuple

from dotenv import dotenv_values
from rich.console import Console
from rich.logging import RichHandler


CHECK_MODES = ("deferred", "immediate")
REPRESENTATION_MODES = ("auto", "quadruple", "normalized", "dual")


class ConfigManager:
    """Manages engine configuration"""

    def __init__(self, config_file: str = ".env"):
        self.config_file = config_file
        self.config: Dict[str, str] = {}
        self.load_default_config()

        # Load existing config if available
        if os.path.exists(config_file):
            self.load_config(config_file)

    def load_default_config(self):
        """Load default configuration values"""
        self.config = {
            'dual_threshold': '100000',
            'representation_mode': 'auto',
            'morton_bits': '10',
            'bootstrap_partitions': '8',
            'imbalance': '1.05',
            'refine_passes': '10',
            'loader_concurrency': '1',
            'check_mode': 'deferred',
            'geometric_tolerance': '1e-12',
            'log_level': 'INFO',
        }

    def load_config(self, config_file: Optional[str] = None):
        """Load configuration from file"""
        if config_file is None:
            config_file = self.config_file

        # Read the file directly so settings never leak between managers through os.environ
        loaded = dotenv_values(config_file)
        for key in self.config.keys():
            value = loaded.get(key)
            if value is not None:
                self.config[key] = value

    def save_config(self, config_dict: Optional[Dict[str, Any]] = None):
        """Save configuration to file"""
        if config_dict:
            for key, value in config_dict.items():
                self.set_value(key, value)

        with open(self.config_file, 'w', encoding='utf-8') as f:
            f.write("# Element count above which both representations are stored\n")
            f.write(f'dual_threshold="{self.config["dual_threshold"]}"\n\n')

            f.write("# auto, quadruple, normalized or dual\n")
            f.write(f'representation_mode="{self.config["representation_mode"]}"\n\n')

            f.write("# Bits per axis of the space-filling-curve grid\n")
            f.write(f'morton_bits="{self.config["morton_bits"]}"\n\n')

            f.write("# Bootstrap partition count, a power of two (typically 8 or 16)\n")
            f.write(f'bootstrap_partitions="{self.config["bootstrap_partitions"]}"\n\n')

            f.write("# Largest allowed partition size as a multiple of the average\n")
            f.write(f'imbalance="{self.config["imbalance"]}"\n\n')

            f.write("# Upper bound on refinement passes\n")
            f.write(f'refine_passes="{self.config["refine_passes"]}"\n\n')

            f.write("# Concurrent bulk loads during gather\n")
            f.write(f'loader_concurrency="{self.config["loader_concurrency"]}"\n\n')

            f.write("# deferred or immediate constraint checking for bulk loads\n")
            f.write(f'check_mode="{self.config["check_mode"]}"\n\n')

            f.write("# Relative tolerance for geometric degeneracy\n")
            f.write(f'geometric_tolerance="{self.config["geometric_tolerance"]}"\n\n')

            f.write("# DEBUG, INFO, WARNING or ERROR\n")
            f.write(f'log_level="{self.config["log_level"]}"\n')

    def get_config(self) -> Dict[str, Any]:
        """Get current configuration"""
        return self.config.copy()

    def get_value(self, key: str, default: Optional[str] = None) -> Optional[str]:
        """Get specific configuration value"""
        return self.config.get(key, default)

    def get_int(self, key: str) -> int:
        return int(self.config[key])

    def get_float(self, key: str) -> float:
        return float(self.config[key])

    def set_value(self, key: str, value: Any):
        """Set specific configuration value"""
        self.config[key] = str(value)

    def validate_config(self) -> Tuple[bool, str]:
        """Validate configuration"""
        try:
            parts = self.get_int('bootstrap_partitions')
            if parts < 1 or parts & (parts - 1):
                return False, "Bootstrap partitions must be a power of two"
        except ValueError:
            return False, "Bootstrap partitions must be a valid number"

        try:
            bits = self.get_int('morton_bits')
            if bits < 1 or bits > 21:
                return False, "Morton bits must be between 1 and 21"
        except ValueError:
            return False, "Morton bits must be a valid number"

        try:
            if self.get_float('imbalance') < 1.0:
                return False, "Imbalance must be at least 1.0"
        except ValueError:
            return False, "Imbalance must be a valid number"

        try:
            if self.get_int('refine_passes') < 1:
                return False, "Refine passes must be at least 1"
            if self.get_int('loader_concurrency') < 1:
                return False, "Loader concurrency must be at least 1"
            if self.get_int('dual_threshold') < 0:
                return False, "Dual threshold must not be negative"
        except ValueError:
            return False, "Counts must be valid numbers"

        if self.config['check_mode'] not in CHECK_MODES:
            return False, f"Check mode must be one of {', '.join(CHECK_MODES)}"

        if self.config['representation_mode'] not in REPRESENTATION_MODES:
            return False, f"Representation mode must be one of {', '.join(REPRESENTATION_MODES)}"

        return True, "Configuration is valid"


def configure_logging(level: str = "INFO"):
    """Route log records to standard error; standard output carries reports only"""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_meshdb", False):
            root.removeHandler(handler)

    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    handler._meshdb = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
