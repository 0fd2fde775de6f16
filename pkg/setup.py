#!/usr/bin/env python3

import sbds
from setuptools import setup


setup(
    name = sbds.__name__,
    packages = [sbds.__name__],
    scripts = ['bin/sbds'],
    version = sbds.__version__,
    description = sbds.__description__,
    author = sbds.__author__,
    author_email = sbds.__author_email__,
    license = sbds.__license__,
    platforms = sbds.__platforms__,
    install_requires = ['numpy', 'scipy'],
    keywords = ['branching diffusion', 'monte carlo', 'principal eigenvalue'],
    classifiers = [
        'Programming Language :: Python',
        'Programming Language :: Python :: 3 :: Only',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Operating System :: POSIX :: Linux',
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Natural Language :: English',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
)
