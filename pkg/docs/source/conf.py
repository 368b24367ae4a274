# Configuration file for the Sphinx documentation builder.
# http://www.sphinx-doc.org/en/master/config

import os
import sys

sys.path.insert(0, os.path.abspath("../../"))

import mataformer  # noqa: E402

project = "mataformer"
copyright = "2026, mataformer developers"
author = "mataformer developers"
version = mataformer.VERSION
release = mataformer.VERSION

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx.ext.githubpages",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"
language = "en"
exclude_patterns: list[str] = []
pygments_style = None

# -- HTML --------------------------------------------------------------------

html_theme = "sphinx_rtd_theme"
html_static_path: list[str] = []
htmlhelp_basename = "mataformerdoc"

# -- Other builders ----------------------------------------------------------

latex_documents = [
    (master_doc, "mataformer.tex", "mataformer Documentation", author, "manual"),
]
man_pages = [(master_doc, "mataformer", "mataformer Documentation", [author], 1)]
texinfo_documents = [
    (
        master_doc,
        "mataformer",
        "mataformer Documentation",
        author,
        "mataformer",
        "Query-conditioned temporal attention for irregular clinical event streams.",
        "Miscellaneous",
    ),
]
epub_title = project
epub_exclude_files = ["search.html"]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
}
