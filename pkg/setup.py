from setuptools import setup, find_packages

setup(
    name="pycontamination",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy>=1.26",
        "pandas>=2.2",
        "pyyaml>=6.0",
        "tqdm>=4.66",
        "pytz>=2024.1",
    ],
    extras_require={"test": ["pytest>=8.0", "scipy>=1.13"]},
    entry_points={
        "console_scripts": [
            "run-contamination=pycontamination.main:main",
            "benchmark-grad-check=profiler.benchmark_grad_check:main",
            "check-acceptance=profiler.acceptance:main",
        ],
    },
)
