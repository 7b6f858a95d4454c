# Copyright (C) 2024 The wbic authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#            http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


import codecs
import os
from setuptools import setup, find_packages


def read(*rnames):
    return codecs.open(os.path.join(os.path.dirname(__file__), *rnames), encoding='utf-8').read()


setup(
    name='wbic',
    version='0.1.0',
    description='Whole-body impedance coordination for wheel-legged robots carrying loads',
    long_description=read('README.rst'),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Framework :: Django",
        "Framework :: Django :: 3.1",
        "Framework :: Django :: 3.2",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering",
        ],
    keywords="robotics,whole-body control,impedance,wheel-legged,quadratic programming",
    author="The wbic authors",
    license='Apache 2.0',
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    package_data={'wbic': ['robots/*.ini']},
    zip_safe=False,
    python_requires='>=3.8',
    install_requires=[
        'Django>=3.1,<4',
        'matplotlib>=3.3',
        'numpy>=1.20',
        'quadprog>=0.1.8',
        'scipy>=1.6',
        ],
    entry_points={
        'console_scripts': [
            'wbic = wbic.cli:main',
        ],
    },
    )
