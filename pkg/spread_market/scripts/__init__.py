"""CLI related functions."""

from .cli import cli
