"""Command-line pipeline: config, commands and reports."""

from .config import Manifest, PipelineConfig, json_schema, load_manifest
from .main import build_parser, main

__all__ = ["Manifest", "PipelineConfig", "build_parser", "json_schema", "load_manifest", "main"]
