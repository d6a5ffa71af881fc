#!/usr/bin/env python3
import os

from setuptools import setup, find_packages

here = os.path.abspath(os.path.dirname(__file__))
README = open(os.path.join(here, 'README.md')).read()

requires = [
    'numpy',
    'plaster',
    'plaster_pastedeploy',
    'PasteDeploy',
    'pygal',
]

tests_require = [
    'nose',
    'coverage',
]

setup(name='iota_rl',
      version='0.0',
      description='iota_rl',
      long_description=README,
      classifiers=[
          "Programming Language :: Python",
          "Programming Language :: Python :: 3",
          "Topic :: Scientific/Engineering :: Artificial Intelligence",
      ],
      author='',
      author_email='',
      url='',
      keywords='reinforcement-learning dqn affordances',
      packages=find_packages(include=['iota_rl', 'iota_rl.*']),
      include_package_data=True,
      zip_safe=False,
      test_suite='iota_rl',
      install_requires=requires,
      tests_require=tests_require,
      entry_points="""\
      [console_scripts]
      iota-rl = iota_rl.scripts.cli:main
      """,
      )
