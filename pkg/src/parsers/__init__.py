"""Parsers for configuration files, corpus manifests and trial lists."""

from .config_parser import ConfigFileParser, build_config, load_config
from .manifest_parser import ManifestParser, format_manifest
from .trial_parser import TrialListParser, format_trials

__all__ = [
    "ConfigFileParser",
    "build_config",
    "load_config",
    "ManifestParser",
    "format_manifest",
    "TrialListParser",
    "format_trials",
]
