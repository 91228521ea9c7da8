"""
Simulation and finite-key analysis of time-bin QKD with a quantum-dot single-photon source.
"""

from setuptools import setup, find_packages

try:
    with open('README.md') as handle:
        long_description = handle.read()
except IOError:
    long_description = "Error reading README"

DOCLINES = __doc__.split("\n")

CLASSIFIERS = """\
Development Status :: 3 - Alpha
Intended Audience :: Science/Research
Intended Audience :: Developers
License :: OSI Approved :: The MIT License (MIT)
Programming Language :: Python
Programming Language :: Python :: 3
Topic :: Scientific/Engineering :: Physics
Operating System :: Unix
"""

################################################################################
# SETUP
################################################################################

setup(
    name='tbqkd',
    author="tbqkd developers",
    description=DOCLINES[1],
    long_description=long_description,
    long_description_content_type='text/markdown',
    version='0.1.0',
    license='MIT',
    python_requires=">=3.7",
    platforms=['Linux-64', 'Mac OSX-64', 'Unix-64'],
    classifiers=CLASSIFIERS.splitlines(),
    packages=['tbqkd', 'tbqkd.tests'] + ['tbqkd.{}'.format(package) for package in find_packages('tbqkd')],
    package_dir={'tbqkd': 'tbqkd'},
    install_requires=[
        'numpy>=1.17',
        'scipy',
        'pyyaml',
    ],
    extras_require={
        'docs': [
            'sphinx',
            'sphinxcontrib-napoleon',
            'sphinx_rtd_theme',
            'numpydoc',
        ],
        'tests': [
            'pytest',
            'pytest-cov',
        ],
    },
    tests_require=[
        'pytest',
        'pytest-cov',
    ],
    entry_points={
        'console_scripts': ['tbqkd=tbqkd.cli:main'],
    },
    zip_safe=False,
    include_package_data=True)
