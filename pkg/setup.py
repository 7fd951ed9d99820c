from setuptools import setup

setup(
    name='hexplore',
    version='0.1.0',
    description='Private functional exploration of databases with homomorphic encryption.',
    license='MIT',
    install_requires=[
        'numpy',
        'scipy',
        'sympy',
        'tensorboardX',
        'tqdm',
    ],
    extras_require={
        'tests': ['pytest', 'mpmath'],
    },
    entry_points={
        'console_scripts': ['hexplore=hexplore.cli:main'],
    },
    packages=['hexplore'])
