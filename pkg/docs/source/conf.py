# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys
from datetime import date
from pathlib import Path

sys.path.insert(0, os.path.abspath("../../"))

os.environ["SPREAD_MARKET_CONFIG"] = (
    Path(__file__).parent / ".." / ".." / "spread_market" / "_default" / "config.toml"
).as_posix()

# -- Project information -----------------------------------------------------

project = "Spread Market"
copyright = f"{date.today().year}, Spread Market developers"
author = "Spread Market developers"

# The full version, including alpha/beta/rc tags
from spread_market import __version__  # noqa

release = __version__

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx_copybutton",
    "sphinxcontrib.autodoc_pydantic",
    "myst_parser",
]

add_module_names = False
autodoc_pydantic_model_show_json = False

templates_path = ["_templates"]
exclude_patterns = []

# -- Options for HTML output -------------------------------------------------

html_theme = "furo"
html_title = "Spread Market"


def run_apidoc(_):
    ignore_paths = [
        "spread_market/*scripts*",
    ]

    ignore_paths = [(Path(__file__).parent.parent.parent / p).absolute().as_posix() for p in ignore_paths]

    argv = [
        "-f",
        "-e",
        "-o",
        Path(__file__).parent.as_posix(),
        (Path(__file__).parent.parent.parent / "spread_market").absolute().as_posix(),
        *ignore_paths,
    ]

    from sphinx.ext import apidoc

    apidoc.main(argv)


def setup(app):
    app.connect("builder-inited", run_apidoc)
