# Sphinx configuration for the puccigrad docs.
# Build with: sphinx-build -b html docs docs/_build

import os
import sys

sys.path.insert(0, os.path.abspath("../src/"))

project = "puccigrad"
copyright = "2026, TESCAN GROUP, a.s."
author = "Jan Matula"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "myst_parser",
]

# docstrings are numpy style throughout
napoleon_google_docstring = False
napoleon_numpy_docstring = True
autodoc_member_order = "bysource"
autodoc_typehints = "description"

templates_path = ["_templates"]
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

html_theme = "sphinx_rtd_theme"
