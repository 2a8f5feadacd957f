from setuptools import setup
from Cython.Build import cythonize

setup(
    name="microcell",
    version="0.1.0",
    py_modules=["config", "errors", "models", "run_config", "micro_cell", "main"],
    packages=["services"],
    ext_modules=cythonize(["services/*.py"], exclude=["services/__init__.py"], language_level=3),
    install_requires=[
        "Cython>=0.29.0",
        "aiofiles>=23.2.1",
        "numpy>=1.23",
        "scipy>=1.9",
        "pandas>=1.5",
    ],
    entry_points={"console_scripts": ["microcell=main:main"]},
)
