#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# tbqkd documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

import tbqkd  # noqa: E402

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc', 'sphinx.ext.autosummary', 'sphinx.ext.doctest', 'sphinx.ext.mathjax', 'sphinx.ext.viewcode',
    'sphinx.ext.napoleon'
]

autodoc_member_order = 'bysource'

# numpy style docstrings only
napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_include_init_with_doc = False
napoleon_include_private_with_doc = False
napoleon_include_special_with_doc = True
napoleon_use_ivar = False
napoleon_use_param = False
napoleon_use_rtype = False

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'tbqkd'
copyright = '2026, tbqkd developers'
author = 'tbqkd developers'
version = tbqkd.__short_version__
release = tbqkd.__version__

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'display_version': True,
    'prev_next_buttons_location': 'bottom',
    'collapse_navigation': False,
    'sticky_navigation': True,
    'navigation_depth': 4,
}
html_static_path = ['_static']
htmlhelp_basename = 'tbqkddoc'

# -- Options for other output ---------------------------------------------

latex_documents = [
    (master_doc, 'tbqkd.tex', 'tbqkd Documentation', author, 'manual'),
]
man_pages = [(master_doc, 'tbqkd', 'tbqkd Documentation', [author], 1)]
