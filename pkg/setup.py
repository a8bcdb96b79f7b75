from setuptools import setup

__version__ = "1.0.0"


setup(
    name = 'SpreadSense',
    version=__version__,
    description='Spread-spectrum (chirp modulated) Fourier compressed sensing simulation and reconstruction',
    zip_safe=False,
    packages = ['spreadsense', 'spreadsense.io'],
    package_dir = {'spreadsense': 'spreadsense',
                   'spreadsense.io': 'spreadsense/io'},
    python_requires='>=3.8',
    install_requires=[
        'numpy',
        'scipy>=1.12',
        'pandas',
        ],
    extras_require={
        'test': ['pytest'],
        },
    scripts = ['bin/s2sense'],
    )
